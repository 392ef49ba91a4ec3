//! Retrieval and classification scoring.
//!
//! Retrieval is one-vs-rest: a query's relevant set is every other sample of
//! its class. A query's precision/recall curve has one point per relevant item
//! retrieved; curves are averaged on a shared recall grid with step
//! interpolation, and the area under a curve is trapezoidal over `[0, 1]` with
//! flat extensions at both ends, so a perfect ranking scores exactly 1.

mod report;

pub use report::{confusion_csv, confusion_heatmap, pr_curves_csv};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::FeatureMatrix;

pub const DEFAULT_RECALL_POINTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// `(recall, precision)` with recall non-decreasing.
    pub points: Vec<(f64, f64)>,
    pub class_id: Option<String>,
}

impl PrCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Self {
        Self {
            points,
            class_id: None,
        }
    }

    pub fn with_class(mut self, class_id: impl Into<String>) -> Self {
        self.class_id = Some(class_id.into());
        self
    }

    /// Precision of the first point whose recall reaches `r`, or the last
    /// precision beyond the final point.
    pub fn precision_at(&self, r: f64) -> f64 {
        self.points
            .iter()
            .find(|(rec, _)| *rec >= r)
            .or_else(|| self.points.last())
            .map_or(0.0, |p| p.1)
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// All samples except `query`, nearest first by Euclidean distance, ties by
/// ascending index.
pub fn retrieval_ranking(query: usize, features: &FeatureMatrix) -> Result<Vec<usize>> {
    if features.rows() < 2 {
        return Err(Error::Argument("retrieval needs at least 2 samples".into()));
    }
    if query >= features.rows() {
        return Err(Error::Index(format!(
            "query {query} outside {} samples",
            features.rows()
        )));
    }
    let q = features.row(query);
    let mut ranked: Vec<(f64, usize)> = (0..features.rows())
        .filter(|&i| i != query)
        .map(|i| (squared_distance(q, features.row(i)), i))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(ranked.into_iter().map(|(_, i)| i).collect())
}

/// After the k-th relevant item at 1-based rank `r_k`: recall `k/|R|`,
/// precision `k/r_k`.
pub fn pr_curve(ranking: &[usize], relevant: &[usize]) -> PrCurve {
    let total = relevant.len();
    let mut points = Vec::with_capacity(total);
    let mut found = 0usize;
    for (pos, item) in ranking.iter().enumerate() {
        if relevant.contains(item) {
            found += 1;
            points.push((found as f64 / total as f64, found as f64 / (pos + 1) as f64));
        }
    }
    PrCurve::new(points)
}

/// `count` uniform recall levels `1/count, 2/count, …, 1`.
pub fn recall_grid(count: usize) -> Vec<f64> {
    (1..=count).map(|k| k as f64 / count as f64).collect()
}

/// Pointwise mean of the step-interpolated curves on `grid`.
pub fn average_pr(curves: &[PrCurve], grid: &[f64]) -> Result<PrCurve> {
    if curves.is_empty() {
        return Err(Error::Argument("no curves to average".into()));
    }
    let n = curves.len() as f64;
    let points = grid
        .iter()
        .map(|&r| (r, curves.iter().map(|c| c.precision_at(r)).sum::<f64>() / n))
        .collect();
    Ok(PrCurve::new(points))
}

/// Trapezoidal area over recall `[0, 1]`.
pub fn auc(curve: &PrCurve) -> f64 {
    let pts = &curve.points;
    let Some(&(r0, p0)) = pts.first() else {
        return 0.0;
    };
    let mut area = r0 * p0;
    for w in pts.windows(2) {
        area += (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0;
    }
    let &(rl, pl) = pts.last().expect("non-empty");
    area += (1.0 - rl).max(0.0) * pl;
    area.clamp(0.0, 1.0)
}

/// Counts indexed `[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn success_rate(&self) -> f64 {
        self.trace() as f64 / self.total().max(1) as f64
    }
}

pub fn confusion_matrix(
    truth: &[usize],
    predicted: &[usize],
    classes: &[String],
) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::Dimension(format!(
            "{} true labels vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let n = classes.len();
    let mut counts = vec![vec![0u64; n]; n];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= n || p >= n {
            return Err(Error::Label(format!(
                "label {} outside {n} classes",
                t.max(p)
            )));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.to_vec(),
        counts,
    })
}

/// Per-query curves grouped into one averaged curve per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalSummary {
    pub class_curves: Vec<PrCurve>,
    pub class_auc: Vec<f64>,
    pub mean_curve: PrCurve,
    pub auc: f64,
}

/// Queries every sample once against all others.
pub fn evaluate_retrieval(
    features: &FeatureMatrix,
    labels: &[usize],
    class_names: &[String],
    grid: &[f64],
) -> Result<RetrievalSummary> {
    use rayon::prelude::*;

    if labels.len() != features.rows() {
        return Err(Error::Dimension("one label per sample required".into()));
    }
    let per_query: Vec<Option<PrCurve>> = (0..features.rows())
        .into_par_iter()
        .map(|q| -> Result<Option<PrCurve>> {
            let relevant: Vec<usize> = (0..labels.len())
                .filter(|&i| i != q && labels[i] == labels[q])
                .collect();
            if relevant.is_empty() {
                return Ok(None);
            }
            let ranking = retrieval_ranking(q, features)?;
            Ok(Some(pr_curve(&ranking, &relevant)))
        })
        .collect::<Result<_>>()?;

    let mut class_curves = Vec::new();
    for (c, name) in class_names.iter().enumerate() {
        let curves: Vec<PrCurve> = per_query
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == c)
            .filter_map(|(curve, _)| curve.clone())
            .collect();
        if !curves.is_empty() {
            class_curves.push(average_pr(&curves, grid)?.with_class(name.clone()));
        }
    }
    if class_curves.is_empty() {
        return Err(Error::Degenerate(
            "no class has two samples, retrieval is undefined".into(),
        ));
    }
    let class_auc = class_curves.iter().map(auc).collect();
    let mean_curve = average_pr(&class_curves, grid)?;
    let auc = auc(&mean_curve);
    Ok(RetrievalSummary {
        class_curves,
        class_auc,
        mean_curve,
        auc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use itertools_free::permutations;
    use proptest::prelude::*;

    mod itertools_free {
        /// All permutations of `0..n` by Heap's algorithm.
        pub fn permutations(n: usize) -> Vec<Vec<usize>> {
            let mut a: Vec<usize> = (0..n).collect();
            let mut out = vec![a.clone()];
            let mut c = vec![0usize; n];
            let mut i = 0;
            while i < n {
                if c[i] < i {
                    if i % 2 == 0 {
                        a.swap(0, i);
                    } else {
                        a.swap(c[i], i);
                    }
                    out.push(a.clone());
                    c[i] += 1;
                    i = 0;
                } else {
                    c[i] = 0;
                    i += 1;
                }
            }
            out
        }
    }

    #[test]
    fn heap_permutation_count() {
        assert_eq!(permutations(4).len(), 24);
    }

    #[test]
    fn ranking_basics() {
        let m = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(retrieval_ranking(0, &m).unwrap(), vec![1, 2]);
        let dup = FeatureMatrix::from_rows(&[vec![5.0], vec![3.0], vec![5.0]]).unwrap();
        assert_eq!(retrieval_ranking(0, &dup).unwrap(), vec![2, 1]);
        let tie = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0], vec![-1.0]]).unwrap();
        assert_eq!(retrieval_ranking(0, &tie).unwrap(), vec![1, 2]);
        assert!(matches!(retrieval_ranking(3, &tie), Err(Error::Index(_))));
    }

    #[test]
    fn worked_curves() {
        let perfect = pr_curve(&[4, 5, 1, 2], &[4, 5]);
        assert!(perfect.points.iter().all(|p| p.1 == 1.0));
        assert_eq!(auc(&perfect), 1.0);

        let c = pr_curve(&[10, 11, 12, 13], &[11, 13]);
        assert_eq!(c.points, vec![(0.5, 0.5), (1.0, 0.5)]);

        let single = pr_curve(&[3, 1, 2, 4, 5, 6, 7, 8, 9, 10], &[3]);
        assert_eq!(single.points, vec![(1.0, 1.0)]);
    }

    #[test]
    fn averaging() {
        let a = PrCurve::new(vec![(0.5, 1.0), (1.0, 0.5)]);
        assert_eq!(
            average_pr(&[a.clone(), a.clone()], &[0.5, 1.0])
                .unwrap()
                .points,
            a.points
        );
        assert_eq!(
            average_pr(std::slice::from_ref(&a), &[0.5, 1.0])
                .unwrap()
                .points,
            vec![(0.5, 1.0), (1.0, 0.5)]
        );
        let one = PrCurve::new(vec![(1.0, 1.0)]);
        let half = PrCurve::new(vec![(1.0, 0.5)]);
        let avg = average_pr(&[one, half], &recall_grid(10)).unwrap();
        assert!(avg.points.iter().all(|p| p.1 == 0.75));
        assert!(average_pr(&[], &[1.0]).is_err());
        // interpolation picks the smallest recall at or above the grid level
        assert_eq!(a.precision_at(0.2), 1.0);
        assert_eq!(a.precision_at(0.7), 0.5);
    }

    #[test]
    fn constant_curves_auc() {
        let grid = recall_grid(100);
        assert_eq!(
            auc(&PrCurve::new(grid.iter().map(|&r| (r, 1.0)).collect())),
            1.0
        );
        assert!((auc(&PrCurve::new(grid.iter().map(|&r| (r, 0.5)).collect())) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn confusion_basics() {
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let truth = vec![0, 0, 1, 2, 2, 2];
        let m = confusion_matrix(&truth, &truth, &names).unwrap();
        assert_eq!(m.trace(), 6);
        assert_eq!(m.counts[0][1], 0);
        let zeros = vec![0; 6];
        let m = confusion_matrix(&truth, &zeros, &names).unwrap();
        assert_eq!(
            m.counts.iter().map(|r| r[0]).collect::<Vec<_>>(),
            vec![2, 1, 3]
        );
        assert!(matches!(
            confusion_matrix(&truth, &[0, 0, 0, 0, 0, 3], &names),
            Err(Error::Label(_))
        ));
        assert!(confusion_matrix(&truth, &[0], &names).is_err());
    }

    #[test]
    fn separated_clusters_retrieve_perfectly() {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![(i / 4) as f64 * 100.0 + (i % 4) as f64])
            .collect();
        let labels: Vec<usize> = (0..12).map(|i| i / 4).collect();
        let names: Vec<String> = (0..3).map(|c| c.to_string()).collect();
        let m = FeatureMatrix::from_rows(&rows).unwrap();
        let s = evaluate_retrieval(&m, &labels, &names, &recall_grid(100)).unwrap();
        assert_eq!(s.auc, 1.0);
        assert!(s.class_auc.iter().all(|&a| a == 1.0));
    }

    proptest! {
        #[test]
        fn trace_counts_correct(labels in proptest::collection::vec((0usize..4, 0usize..4), 1..60)) {
            let names: Vec<String> = (0..4).map(|c| c.to_string()).collect();
            let (t, p): (Vec<usize>, Vec<usize>) = labels.iter().cloned().unzip();
            let m = confusion_matrix(&t, &p, &names).unwrap();
            let correct = t.iter().zip(&p).filter(|(a, b)| a == b).count() as u64;
            prop_assert_eq!(m.trace(), correct);
            prop_assert!((m.success_rate() - correct as f64 / t.len() as f64).abs() < 1e-15);
            for (c, row) in m.counts.iter().enumerate() {
                prop_assert_eq!(row.iter().sum::<u64>(), t.iter().filter(|&&x| x == c).count() as u64);
            }
        }

        #[test]
        fn auc_bounded_and_monotone(
            base in proptest::collection::vec(0.0f64..1.0, 1..20),
            lift in proptest::collection::vec(0.0f64..0.5, 20),
        ) {
            let n = base.len();
            let low = PrCurve::new(base.iter().enumerate().map(|(k, &p)| ((k + 1) as f64 / n as f64, p)).collect());
            let high = PrCurve::new(low.points.iter().zip(&lift).map(|(&(r, p), l)| (r, (p + l).min(1.0))).collect());
            let (a, b) = (auc(&low), auc(&high));
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(a <= b + 1e-15);
        }

        #[test]
        fn averaging_ignores_order(
            precisions in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 4), 1..6),
        ) {
            let curves: Vec<PrCurve> = precisions
                .iter()
                .map(|ps| PrCurve::new(ps.iter().enumerate().map(|(k, &p)| ((k + 1) as f64 / 4.0, p)).collect()))
                .collect();
            let mut reversed = curves.clone();
            reversed.reverse();
            let grid = recall_grid(20);
            let a = average_pr(&curves, &grid).unwrap();
            let b = average_pr(&reversed, &grid).unwrap();
            for (x, y) in a.points.iter().zip(&b.points) {
                prop_assert!((x.1 - y.1).abs() < 1e-12);
            }
        }
    }
}
