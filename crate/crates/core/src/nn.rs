//! Pooled-sample nearest-neighbour graph and the cross-edge count.
//!
//! For a pooled cloud `S = A ∪ B` every point gets its directed 1-NN in
//! `S \ {s}` under Euclidean distance; equal distances go to the smaller
//! pooled index. The within-`B` count is `Σ_{b ∈ B} 1{NN(b) ∈ B}`. With `A`
//! the whitened data and `B` the reference sample that count is the test
//! statistic `T`, centred near `n/2` when the two clouds are exchangeable.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GofError, Result};
use crate::kdtree::{squared_distance, KdTree};
use crate::sample::Sample;

/// Point count above which [`NnMethod::Auto`] switches to the kd-tree.
pub const BRUTE_FORCE_LIMIT: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NnMethod {
    #[default]
    Auto,
    Brute,
    KdTree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    /// Observed (whitened) data.
    A,
    /// Reference sample.
    B,
}

/// Two labelled samples pooled into one cloud, `A` rows first.
#[derive(Debug, Clone)]
pub struct PooledCloud {
    points: Sample,
    labels: Vec<Label>,
    n_a: usize,
    n_b: usize,
}

impl PooledCloud {
    pub fn new(a: &Sample, b: &Sample) -> Result<Self> {
        let points = a.stack(b)?;
        let mut labels = vec![Label::A; a.n()];
        labels.extend(std::iter::repeat_n(Label::B, b.n()));
        Ok(Self {
            points,
            labels,
            n_a: a.n(),
            n_b: b.n(),
        })
    }

    /// Pool arbitrary points with arbitrary labels.
    pub fn with_labels(points: Sample, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != points.n() {
            return Err(GofError::DimensionMismatch {
                expected: points.n(),
                found: labels.len(),
            });
        }
        let n_a = labels.iter().filter(|&&l| l == Label::A).count();
        let n_b = labels.len() - n_a;
        Ok(Self {
            points,
            labels,
            n_a,
            n_b,
        })
    }

    pub fn points(&self) -> &Sample {
        &self.points
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn count(&self, label: Label) -> usize {
        match label {
            Label::A => self.n_a,
            Label::B => self.n_b,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Index of each point's nearest other point.
pub fn nearest_neighbor_indices(points: &Sample, method: NnMethod) -> Result<Vec<usize>> {
    let n = points.n();
    if n < 2 {
        return Err(GofError::TooFewObservations { needed: 2, got: n });
    }
    let method = match method {
        NnMethod::Auto if n <= BRUTE_FORCE_LIMIT => NnMethod::Brute,
        NnMethod::Auto => NnMethod::KdTree,
        other => other,
    };
    let nn: Vec<(usize, f64)> = match method {
        NnMethod::Brute => (0..n)
            .into_par_iter()
            .map(|i| {
                let q = points.row(i);
                let mut best = (f64::INFINITY, usize::MAX);
                for j in (0..n).filter(|&j| j != i) {
                    let d = squared_distance(q, points.row(j));
                    if d < best.0 {
                        best = (d, j);
                    }
                }
                (best.1, best.0)
            })
            .collect(),
        NnMethod::KdTree => {
            let tree = KdTree::build(points);
            (0..n)
                .into_par_iter()
                .map(|i| tree.nearest_excluding(i).expect("at least two points"))
                .collect()
        }
        NnMethod::Auto => unreachable!(),
    };
    let ties = nn.iter().filter(|(_, d)| *d == 0.0).count();
    if ties > 0 {
        log::debug!("{ties} points have a duplicate; resolved by smallest index");
    }
    Ok(nn.into_iter().map(|(j, _)| j).collect())
}

/// Condensed table of pairwise squared distances, computed once and shared
/// by the nearest-neighbour graph and the energy statistic.
#[derive(Debug, Clone)]
pub struct PairwiseDistances {
    n: usize,
    // Row-major full matrix; symmetric with zero diagonal.
    d2: Vec<f64>,
}

impl PairwiseDistances {
    pub fn new(points: &Sample) -> Self {
        let n = points.n();
        let mut d2 = vec![0.0; n * n];
        for i in 0..n {
            let a = points.row(i);
            for j in (i + 1)..n {
                let d = squared_distance(a, points.row(j));
                d2[i * n + j] = d;
                d2[j * n + i] = d;
            }
        }
        Self { n, d2 }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn squared(&self, i: usize, j: usize) -> f64 {
        self.d2[i * self.n + j]
    }

    /// Same result as [`nearest_neighbor_indices`] with the brute-force scan.
    pub fn nearest_neighbors(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| {
                let row = &self.d2[i * self.n..(i + 1) * self.n];
                let mut best = (f64::INFINITY, usize::MAX);
                for (j, &d) in row.iter().enumerate() {
                    if j != i && d < best.0 {
                        best = (d, j);
                    }
                }
                best.1
            })
            .collect()
    }
}

/// `Σ_{i: label(i) = target} 1{label(NN(i)) = target}`.
pub fn within_count_from_nn(nn: &[usize], labels: &[Label], target: Label) -> usize {
    nn.iter()
        .zip(labels)
        .filter(|(&j, &l)| l == target && labels[j] == target)
        .count()
}

pub fn within_count(cloud: &PooledCloud, target: Label, method: NnMethod) -> Result<usize> {
    let nn = nearest_neighbor_indices(cloud.points(), method)?;
    Ok(within_count_from_nn(&nn, cloud.labels(), target))
}

/// Cross-edge count `T` and its standardisation `(T − n/2)/√(n/4)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NnStatResult {
    /// Reference points whose nearest neighbour is also a reference point.
    pub t_count: usize,
    /// Number of reference points.
    pub n: usize,
    pub z_score: f64,
}

impl NnStatResult {
    pub fn new(t_count: usize, n: usize) -> Self {
        let nf = n as f64;
        Self {
            t_count,
            n,
            z_score: (t_count as f64 - nf / 2.0) / (nf / 4.0).sqrt(),
        }
    }
}

/// Pool `Z ∪ Y` and count reference (`Y`) points whose 1-NN lies in `Y`.
pub fn cross_edge_statistic(z: &Sample, y: &Sample, method: NnMethod) -> Result<NnStatResult> {
    if z.m() != y.m() {
        return Err(GofError::DimensionMismatch {
            expected: z.m(),
            found: y.m(),
        });
    }
    let cloud = PooledCloud::new(z, y)?;
    let t = within_count(&cloud, Label::B, method)?;
    Ok(NnStatResult::new(t, y.n()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mggd::{sample_standard, ShapeParam};
    use nalgebra::{DMatrix, DVector};
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Sample {
        Sample::from_rows((0..n * m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(), n, m).unwrap()
    }

    fn line(xs: &[f64]) -> Sample {
        Sample::from_rows(xs.to_vec(), xs.len(), 1).unwrap()
    }

    #[test]
    fn points_on_a_line() {
        let pts = line(&[0.0, 1.0, 3.0]);
        for method in [NnMethod::Brute, NnMethod::KdTree] {
            assert_eq!(nearest_neighbor_indices(&pts, method).unwrap(), vec![1, 0, 1]);
        }
    }

    #[test]
    fn equilateral_triangle_uses_smallest_index() {
        let h = 3f64.sqrt() / 2.0;
        let pts = Sample::from_vecs(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, h]]).unwrap();
        let d01 = squared_distance(pts.row(0), pts.row(1));
        let d02 = squared_distance(pts.row(0), pts.row(2));
        let d12 = squared_distance(pts.row(1), pts.row(2));
        // Float rounding may break the symmetry; the expected answer follows
        // from the computed distances and the smallest-index rule.
        let pick = |cands: [(f64, usize); 2]| {
            if cands[0].0 <= cands[1].0 { cands[0].1 } else { cands[1].1 }
        };
        let expected = vec![pick([(d01, 1), (d02, 2)]), pick([(d01, 0), (d12, 2)]), pick([(d02, 0), (d12, 1)])];
        for method in [NnMethod::Brute, NnMethod::KdTree] {
            assert_eq!(nearest_neighbor_indices(&pts, method).unwrap(), expected);
        }
        // Exactly representable ties: square corners.
        let sq = Sample::from_vecs(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        for method in [NnMethod::Brute, NnMethod::KdTree] {
            assert_eq!(nearest_neighbor_indices(&sq, method).unwrap(), vec![1, 0, 0, 1]);
        }
    }

    #[test]
    fn needs_two_points() {
        assert!(nearest_neighbor_indices(&line(&[1.0]), NnMethod::Brute).is_err());
    }

    #[test]
    fn kd_tree_matches_brute_force_in_high_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let pts = gaussian(200, 50, &mut rng);
            assert_eq!(
                nearest_neighbor_indices(&pts, NnMethod::KdTree).unwrap(),
                nearest_neighbor_indices(&pts, NnMethod::Brute).unwrap()
            );
        }
    }

    #[test]
    fn kd_tree_matches_brute_force_with_duplicates_and_grid_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            // Integer grid points: many exact ties and duplicates.
            let rows: Vec<Vec<f64>> = (0..150)
                .map(|_| (0..3).map(|_| rng.random_range(0..4) as f64).collect())
                .collect();
            let pts = Sample::from_vecs(&rows).unwrap();
            let brute = nearest_neighbor_indices(&pts, NnMethod::Brute).unwrap();
            assert_eq!(nearest_neighbor_indices(&pts, NnMethod::KdTree).unwrap(), brute);
            assert_eq!(PairwiseDistances::new(&pts).nearest_neighbors(), brute);
        }
    }

    #[test]
    fn separated_clusters_have_no_cross_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = gaussian(30, 3, &mut rng);
        let far = gaussian(30, 3, &mut rng);
        // Cluster diameters are O(10); shift by 1000.
        let b = far.affine(&DMatrix::identity(3, 3), &DVector::from_element(3, 1000.0)).unwrap();
        let cloud = PooledCloud::new(&a, &b).unwrap();
        assert_eq!(within_count(&cloud, Label::B, NnMethod::Auto).unwrap(), 30);
        assert_eq!(within_count(&cloud, Label::A, NnMethod::Auto).unwrap(), 30);
    }

    #[test]
    fn single_pair_is_a_forced_cross_edge() {
        let cloud = PooledCloud::new(&line(&[0.0]), &line(&[1.0])).unwrap();
        assert_eq!(within_count(&cloud, Label::B, NnMethod::Brute).unwrap(), 0);
    }

    #[test]
    fn within_count_matches_exhaustive_recount() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts = gaussian(20, 3, &mut rng);
        let labels: Vec<Label> = (0..20).map(|_| if rng.random::<bool>() { Label::A } else { Label::B }).collect();
        let cloud = PooledCloud::with_labels(pts.clone(), labels.clone()).unwrap();
        let mut expected = 0;
        for i in 0..20 {
            if labels[i] != Label::B {
                continue;
            }
            let mut best = (f64::INFINITY, 0);
            for j in 0..20 {
                if j == i {
                    continue;
                }
                let d: f64 = pts.row(i).iter().zip(pts.row(j)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                if d < best.0 {
                    best = (d, j);
                }
            }
            if labels[best.1] == Label::B {
                expected += 1;
            }
        }
        assert_eq!(within_count(&cloud, Label::B, NnMethod::Brute).unwrap(), expected);
    }

    #[test]
    fn far_apart_samples_give_maximal_statistic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y = gaussian(40, 4, &mut rng);
        let z = gaussian(40, 4, &mut rng)
            .affine(&DMatrix::identity(4, 4), &DVector::from_element(4, 1e6))
            .unwrap();
        let r = cross_edge_statistic(&z, &y, NnMethod::Auto).unwrap();
        assert_eq!(r.t_count, 40);
        assert!((r.z_score - 40f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn z_score_is_exact() {
        let r = NnStatResult::new(30, 40);
        assert_eq!(r.z_score, (30.0 - 20.0) / 10f64.sqrt());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = Sample::from_vecs(&[vec![0.0, 1.0]]).unwrap();
        let b = line(&[1.0]);
        assert!(matches!(
            cross_edge_statistic(&a, &b, NnMethod::Brute),
            Err(GofError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn duplicated_cloud_with_random_labels_centres_at_half() {
        // Every point has an exact twin; each point's NN is its twin, and a
        // random balanced labelling makes the twin share the label w.p. ≈ 1/2.
        let n = 100;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let y = gaussian(n, 5, &mut rng);
        let pts = y.stack(&y).unwrap();
        let nn = nearest_neighbor_indices(&pts, NnMethod::Brute).unwrap();
        let reps = 2000;
        let mut total = 0usize;
        for _ in 0..reps {
            let mut labels: Vec<Label> = vec![Label::A; n];
            labels.extend(vec![Label::B; n]);
            labels.shuffle(&mut rng);
            total += within_count_from_nn(&nn, &labels, Label::B);
        }
        let mean = total as f64 / reps as f64;
        // Exact expectation n(n−1)/(2n−1) ≈ 49.75.
        let exact = (n * (n - 1)) as f64 / (2 * n - 1) as f64;
        assert!((mean - exact).abs() < 0.5, "{mean}");
        assert!((mean - n as f64 / 2.0).abs() < 1.0);
    }

    #[test]
    fn null_mean_is_half_for_gaussian_clouds() {
        let (n, m, reps) = (100, 10, 500);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ts: Vec<f64> = (0..reps)
            .map(|_| {
                let z = gaussian(n, m, &mut rng);
                let y = gaussian(n, m, &mut rng);
                cross_edge_statistic(&z, &y, NnMethod::Auto).unwrap().t_count as f64
            })
            .collect();
        let mean = crate::stats::mean(&ts);
        let se = (crate::stats::variance(&ts) / reps as f64).sqrt();
        assert!((mean - n as f64 / 2.0).abs() < 3.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn moving_reference_away_never_decreases_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let z = sample_standard(6, ShapeParam::new(0.8).unwrap(), 60, &mut rng).unwrap();
        let y = sample_standard(6, ShapeParam::new(0.8).unwrap(), 60, &mut rng).unwrap();
        let dir = DVector::from_vec(vec![1.0, -2.0, 0.5, 0.0, 1.0, 3.0]).normalize();
        let mut prev = 0;
        for k in 0..40 {
            let shift = &dir * (k as f64 * 0.5);
            let moved = y.affine(&DMatrix::identity(6, 6), &shift).unwrap();
            let t = cross_edge_statistic(&z, &moved, NnMethod::Brute).unwrap().t_count;
            if k > 0 {
                // Monotone in expectation; allow small local dips but demand the trend.
                assert!(t + 8 >= prev, "shift {k}: {t} after {prev}");
            }
            prev = prev.max(t);
        }
        let far = y.affine(&DMatrix::identity(6, 6), &(&dir * 1e4)).unwrap();
        assert_eq!(cross_edge_statistic(&z, &far, NnMethod::Brute).unwrap().t_count, 60);
    }
}
