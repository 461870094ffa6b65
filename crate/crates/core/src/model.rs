//! Parametric linear stochastic systems
//! `x' = A(α) x + B(α) u + q + η` with `A(α) = Σ αᵢ Aᵢ` over the unit simplex.

use nalgebra::{Cholesky, DMatrix, DVector, LU};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{
    bounding_box, vhull_to_hrep, HPolytope, HyperRectangle, Partition, VPolytope, CONTAINMENT_TOL,
    MAX_HULL_DIM,
};

/// Tolerance on the simplex membership of a parameter vector.
pub const SIMPLEX_TOL: f64 = 1e-9;
/// Largest accepted condition number of the nominal state matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Where process noise samples come from.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec {
    /// Zero-mean Gaussian with the given covariance.
    Gaussian { covariance: DMatrix<f64> },
    /// Recorded samples, replayed in order and cycled.
    Replay { samples: Vec<DVector<f64>> },
}

impl NoiseSpec {
    pub fn gaussian_diagonal(variances: &[f64]) -> Self {
        NoiseSpec::Gaussian {
            covariance: DMatrix::from_diagonal(&DVector::from_column_slice(variances)),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            NoiseSpec::Gaussian { covariance } => covariance.nrows(),
            NoiseSpec::Replay { samples } => samples.first().map_or(0, |s| s.len()),
        }
    }

    /// A sampler on stream `stream` of the generator seeded with `seed`.
    /// Distinct streams are statistically independent.
    pub fn source(&self, seed: u64, stream: u64) -> Result<NoiseSource> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let kind = match self {
            NoiseSpec::Gaussian { covariance } => {
                let factor = if covariance.iter().all(|v| *v == 0.0) {
                    covariance.clone()
                } else {
                    Cholesky::new(covariance.clone())
                        .ok_or_else(|| {
                            Error::Config("noise covariance is not positive definite".into())
                        })?
                        .l()
                };
                SourceKind::Gaussian { factor }
            }
            NoiseSpec::Replay { samples } => {
                if samples.is_empty() {
                    return Err(Error::Config("empty noise replay buffer".into()));
                }
                SourceKind::Replay {
                    samples: samples.clone(),
                    cursor: 0,
                }
            }
        };
        Ok(NoiseSource { kind, rng })
    }
}

/// A stateful stream of i.i.d. noise vectors.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    kind: SourceKind,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone)]
enum SourceKind {
    Gaussian { factor: DMatrix<f64> },
    Replay { samples: Vec<DVector<f64>>, cursor: usize },
}

impl NoiseSource {
    pub fn next_sample(&mut self) -> DVector<f64> {
        match &mut self.kind {
            SourceKind::Gaussian { factor } => {
                let n = factor.nrows();
                let z = DVector::from_fn(n, |_, _| self.rng.sample::<f64, _>(StandardNormal));
                &*factor * z
            }
            SourceKind::Replay { samples, cursor } => {
                let s = samples[*cursor].clone();
                *cursor = (*cursor + 1) % samples.len();
                s
            }
        }
    }

    pub fn draw(&mut self, count: usize) -> Vec<DVector<f64>> {
        (0..count).map(|_| self.next_sample()).collect()
    }
}

/// Linear system whose matrices are a convex combination of `r` vertices.
#[derive(Debug, Clone)]
pub struct ParametricLinearModel {
    a_list: Vec<DMatrix<f64>>,
    b_list: Vec<DMatrix<f64>>,
    alpha_hat: DVector<f64>,
    a_hat: DMatrix<f64>,
    b_hat: DMatrix<f64>,
    a_hat_lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    control_set: VPolytope,
    control_hrep: HPolytope,
    disturbance: Option<HyperRectangle>,
    noise: NoiseSpec,
    horizon: usize,
}

impl ParametricLinearModel {
    /// Checks dimensions, that `alpha_hat` lies in the simplex and that
    /// `A(alpha_hat)` is well conditioned. Noise defaults to none, horizon to 1.
    pub fn new(
        a_list: Vec<DMatrix<f64>>,
        b_list: Vec<DMatrix<f64>>,
        alpha_hat: DVector<f64>,
        control_set: VPolytope,
    ) -> Result<Self> {
        let r = a_list.len();
        if r == 0 {
            return Err(Error::Config("at least one vertex matrix is required".into()));
        }
        if b_list.len() != r {
            return Err(Error::DimensionMismatch {
                expected: r,
                got: b_list.len(),
            });
        }
        let n = a_list[0].nrows();
        if n > MAX_HULL_DIM {
            return Err(Error::DimensionTooLarge {
                dim: n,
                max: MAX_HULL_DIM,
            });
        }
        let m = b_list[0].ncols();
        for (a, b) in a_list.iter().zip(&b_list) {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: a.ncols().max(a.nrows()),
                });
            }
            if b.nrows() != n || b.ncols() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: b.ncols(),
                });
            }
        }
        if control_set.dim() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: control_set.dim(),
            });
        }
        check_simplex(&alpha_hat, r)?;

        let (a_hat, b_hat) = mix(&a_list, &b_list, &alpha_hat);
        let sv = a_hat.singular_values();
        let cond = sv.max() / sv.min();
        if !(cond <= MAX_CONDITION) {
            return Err(Error::IllConditioned(cond));
        }
        let control_hrep = vhull_to_hrep(&control_set)?;
        let noise = NoiseSpec::Gaussian {
            covariance: DMatrix::zeros(n, n),
        };
        Ok(Self {
            a_hat_lu: a_hat.clone().lu(),
            a_list,
            b_list,
            alpha_hat,
            a_hat,
            b_hat,
            control_set,
            control_hrep,
            disturbance: None,
            noise,
            horizon: 1,
        })
    }

    pub fn with_disturbance(mut self, q: HyperRectangle) -> Result<Self> {
        if q.dim() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: q.dim(),
            });
        }
        self.disturbance = Some(q);
        Ok(self)
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Result<Self> {
        if noise.dim() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: noise.dim(),
            });
        }
        self.noise = noise;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    /// The same model with every vertex replaced by the nominal matrices,
    /// i.e. parameter uncertainty ignored.
    pub fn nominal_only(&self) -> Self {
        let mut out = self.clone();
        out.a_list = vec![self.a_hat.clone()];
        out.b_list = vec![self.b_hat.clone()];
        out.alpha_hat = DVector::from_element(1, 1.0);
        out
    }

    pub fn n(&self) -> usize {
        self.a_hat.nrows()
    }

    pub fn m(&self) -> usize {
        self.b_hat.ncols()
    }

    pub fn r(&self) -> usize {
        self.a_list.len()
    }

    pub fn a_list(&self) -> &[DMatrix<f64>] {
        &self.a_list
    }

    pub fn b_list(&self) -> &[DMatrix<f64>] {
        &self.b_list
    }

    pub fn alpha_hat(&self) -> &DVector<f64> {
        &self.alpha_hat
    }

    /// Nominal matrices `(A(α̂), B(α̂))`.
    pub fn nominal(&self) -> (&DMatrix<f64>, &DMatrix<f64>) {
        (&self.a_hat, &self.b_hat)
    }

    pub fn control_set(&self) -> &VPolytope {
        &self.control_set
    }

    pub fn control_hrep(&self) -> &HPolytope {
        &self.control_hrep
    }

    pub fn disturbance(&self) -> Option<&HyperRectangle> {
        self.disturbance.as_ref()
    }

    /// Center `q̄` of the disturbance box, zero without one. The nominal
    /// dynamics include it as a known offset; only `q - q̄` is adversarial.
    pub fn disturbance_center(&self) -> DVector<f64> {
        self.disturbance
            .as_ref()
            .map_or_else(|| DVector::zeros(self.n()), |q| DVector::from_vec(q.center()))
    }

    /// The disturbance box shifted to be centered at the origin.
    fn centered_disturbance(&self) -> Option<HyperRectangle> {
        self.disturbance.as_ref().map(|q| {
            let c: Vec<f64> = q.center().iter().map(|v| -v).collect();
            q.translate(&c)
        })
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `(Σ αᵢ Aᵢ, Σ αᵢ Bᵢ)` for `alpha` in the unit simplex.
    pub fn combine(&self, alpha: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        check_simplex(alpha, self.r())?;
        Ok(mix(&self.a_list, &self.b_list, alpha))
    }

    /// Like [`combine`](Self::combine) but accepts any affine weights summing to
    /// one. Used to probe parameters beyond the vertices, where no guarantee holds.
    pub fn combine_affine(&self, alpha: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        if alpha.len() != self.r() {
            return Err(Error::DimensionMismatch {
                expected: self.r(),
                got: alpha.len(),
            });
        }
        if (alpha.sum() - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::NotInSimplex(alpha.iter().copied().collect()));
        }
        Ok(mix(&self.a_list, &self.b_list, alpha))
    }

    /// Vertices of the states from which some admissible input drives the
    /// nominal dynamics into `target`: one solve of `A(α̂) x = t - q̄ - B(α̂) u`
    /// per (target vertex, input vertex) pair, sharing one factorization.
    pub fn backward_reach_set(&self, target: &VPolytope) -> Result<VPolytope> {
        if target.dim() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: target.dim(),
            });
        }
        let target = target.canonicalize();
        let inputs = self.control_set.canonicalize();
        let offset = self.disturbance_center();
        let mut rhs = DMatrix::zeros(self.n(), target.vertices().len() * inputs.vertices().len());
        let mut col = 0;
        for t in target.vertices() {
            for u in inputs.vertices() {
                rhs.set_column(col, &(t - &offset - &self.b_hat * u));
                col += 1;
            }
        }
        let sol = self
            .a_hat_lu
            .solve(&rhs)
            .ok_or(Error::IllConditioned(f64::INFINITY))?;
        VPolytope::new(sol.column_iter().map(|c| c.into_owned()).collect())
    }

    /// Vertex set whose hull contains every epistemic error
    /// `(A(α) - A(α̂)) x + (B(α) - B(α̂)) u` for `x` in `region` and `u` in the
    /// control set, Minkowski-extended by the centered disturbance box when present.
    pub fn epistemic_error_hull(&self, region: &HyperRectangle) -> Result<VPolytope> {
        self.check_region(region)?;
        let region_vertices = region.vertices();
        let inputs = self.control_set.canonicalize();
        let mut points = Vec::new();
        for (a, b) in self.a_list.iter().zip(&self.b_list) {
            let da = a - &self.a_hat;
            let db = b - &self.b_hat;
            for v in &region_vertices {
                let dv = &da * v;
                for u in inputs.vertices() {
                    points.push(&dv + &db * u);
                }
            }
        }
        let mut hull = VPolytope::new(points)?.canonicalize();
        if let Some(q) = &self.centered_disturbance() {
            let mut sums = Vec::new();
            for p in hull.vertices() {
                for w in q.vertices() {
                    sums.push(p + w);
                }
            }
            hull = VPolytope::new(sums)?.canonicalize();
        }
        Ok(hull)
    }

    /// Bounding box of [`epistemic_error_hull`](Self::epistemic_error_hull),
    /// computed directly from support functions without enumerating vertices.
    pub fn epistemic_error_box(&self, region: &HyperRectangle) -> Result<HyperRectangle> {
        self.check_region(region)?;
        let n = self.n();
        let inputs = self.control_set.canonicalize();
        let mut lower = vec![f64::INFINITY; n];
        let mut upper = vec![f64::NEG_INFINITY; n];
        for (a, b) in self.a_list.iter().zip(&self.b_list) {
            let da = a - &self.a_hat;
            let db = b - &self.b_hat;
            for d in 0..n {
                let (mut lo, mut hi) = (0.0, 0.0);
                for c in 0..n {
                    let coef = da[(d, c)];
                    let (x0, x1) = (coef * region.lower()[c], coef * region.upper()[c]);
                    lo += x0.min(x1);
                    hi += x0.max(x1);
                }
                let row = db.row(d);
                let (ulo, uhi) = inputs
                    .vertices()
                    .iter()
                    .map(|u| row.dot(&u.transpose()))
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
                        (l.min(v), h.max(v))
                    });
                lower[d] = lower[d].min(lo + ulo);
                upper[d] = upper[d].max(hi + uhi);
            }
        }
        let mut out = HyperRectangle::new_unchecked(lower, upper);
        if let Some(q) = &self.centered_disturbance() {
            out = out.minkowski_sum(q)?;
        }
        Ok(out)
    }

    /// One step `A(α) x + B(α) u + q + η` for `alpha` in the simplex.
    pub fn step(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        alpha: &DVector<f64>,
        eta: &DVector<f64>,
        q: Option<&DVector<f64>>,
    ) -> Result<DVector<f64>> {
        let (a, b) = self.combine(alpha)?;
        self.step_with(&a, &b, x, u, eta, q)
    }

    /// One step with explicitly supplied system matrices.
    pub fn step_with(
        &self,
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        x: &DVector<f64>,
        u: &DVector<f64>,
        eta: &DVector<f64>,
        q: Option<&DVector<f64>>,
    ) -> Result<DVector<f64>> {
        if x.len() != self.n() || eta.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: if x.len() != self.n() { x.len() } else { eta.len() },
            });
        }
        if u.len() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                got: u.len(),
            });
        }
        if !self.control_hrep.contains_point(u) {
            return Err(Error::InputOutsideControlSet);
        }
        let mut next = a * x + b * u + eta;
        if let Some(q) = q {
            let inside = self.disturbance.as_ref().is_some_and(|set| {
                q.len() == set.dim()
                    && q.iter().enumerate().all(|(d, v)| {
                        set.lower()[d] - CONTAINMENT_TOL <= *v && *v <= set.upper()[d] + CONTAINMENT_TOL
                    })
            });
            if !inside {
                return Err(Error::InvalidArgument("disturbance outside its set".into()));
            }
            next += q;
        }
        Ok(next)
    }

    fn check_region(&self, region: &HyperRectangle) -> Result<()> {
        if region.dim() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: region.dim(),
            });
        }
        Ok(())
    }
}

fn check_simplex(alpha: &DVector<f64>, r: usize) -> Result<()> {
    if alpha.len() != r {
        return Err(Error::DimensionMismatch {
            expected: r,
            got: alpha.len(),
        });
    }
    let ok = alpha.iter().all(|a| *a >= -SIMPLEX_TOL) && (alpha.sum() - 1.0).abs() <= SIMPLEX_TOL;
    if ok {
        Ok(())
    } else {
        Err(Error::NotInSimplex(alpha.iter().copied().collect()))
    }
}

fn mix(
    a_list: &[DMatrix<f64>],
    b_list: &[DMatrix<f64>],
    alpha: &DVector<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut a = DMatrix::zeros(a_list[0].nrows(), a_list[0].ncols());
    let mut b = DMatrix::zeros(b_list[0].nrows(), b_list[0].ncols());
    for (i, w) in alpha.iter().enumerate() {
        a += &a_list[i] * *w;
        b += &b_list[i] * *w;
    }
    (a, b)
}

/// The abstract actions: one target polytope per action plus the point the
/// controller steers towards.
#[derive(Debug, Clone)]
pub struct ActionTargets {
    targets: Vec<VPolytope>,
    representatives: Vec<DVector<f64>>,
    hreps: Vec<HPolytope>,
    boxes: Vec<HyperRectangle>,
}

impl ActionTargets {
    /// Targets with their vertex means as representative points.
    pub fn new(targets: Vec<VPolytope>) -> Result<Self> {
        let reps = targets.iter().map(VPolytope::vertex_mean).collect();
        Self::with_representatives(targets, reps)
    }

    pub fn with_representatives(
        targets: Vec<VPolytope>,
        representatives: Vec<DVector<f64>>,
    ) -> Result<Self> {
        if targets.len() != representatives.len() {
            return Err(Error::DimensionMismatch {
                expected: targets.len(),
                got: representatives.len(),
            });
        }
        let hreps = targets
            .iter()
            .map(vhull_to_hrep)
            .collect::<Result<Vec<_>>>()?;
        for (i, (h, p)) in hreps.iter().zip(&representatives).enumerate() {
            if !h.contains_point(p) {
                return Err(Error::Config(format!(
                    "representative point of target {i} lies outside it"
                )));
            }
        }
        let boxes = targets
            .iter()
            .map(|t| bounding_box(t.vertices()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            targets,
            representatives,
            hreps,
            boxes,
        })
    }

    /// One box target per non-absorbing region, steering to its center.
    pub fn from_boxes(boxes: &[HyperRectangle]) -> Result<Self> {
        let targets = boxes.iter().map(HyperRectangle::to_vpolytope).collect();
        let reps = boxes
            .iter()
            .map(|b| DVector::from_vec(b.center()))
            .collect();
        let hreps = boxes.iter().map(HyperRectangle::to_hpolytope).collect();
        Ok(Self {
            targets,
            representatives: reps,
            hreps,
            boxes: boxes.to_vec(),
        })
    }

    /// One target per partition cell.
    pub fn from_partition(partition: &Partition) -> Result<Self> {
        Self::from_boxes(partition.regions())
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn target(&self, l: usize) -> &VPolytope {
        &self.targets[l]
    }

    pub fn representative(&self, l: usize) -> &DVector<f64> {
        &self.representatives[l]
    }

    pub fn hrep(&self, l: usize) -> &HPolytope {
        &self.hreps[l]
    }

    pub fn bounding_box(&self, l: usize) -> &HyperRectangle {
        &self.boxes[l]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn drone_like() -> ParametricLinearModel {
        let a = |m: f64| DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0 - 0.1 / m]);
        let b = |m: f64| DMatrix::from_row_slice(2, 1, &[0.5 / m, 1.0 / m]);
        ParametricLinearModel::new(
            vec![a(0.75), a(1.25)],
            vec![b(0.75), b(1.25)],
            DVector::from_vec(vec![0.375, 0.625]),
            VPolytope::from_rows(&[vec![-5.0], vec![5.0]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn combine_at_vertices_and_midpoint() {
        let model = drone_like();
        let (a, b) = model.combine(&DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_eq!(a, model.a_list()[0]);
        assert_eq!(b, model.b_list()[0]);
        assert_relative_eq!(a[(1, 1)], 1.0 - 0.1 / 0.75);
        let (a, _) = model.combine(&DVector::from_vec(vec![0.5, 0.5])).unwrap();
        let avg = (&model.a_list()[0] + &model.a_list()[1]) * 0.5;
        assert_relative_eq!(a, avg);
    }

    #[test]
    fn combine_rejects_points_off_the_simplex() {
        let model = drone_like();
        assert!(model.combine(&DVector::from_vec(vec![1.2, -0.2])).is_err());
        assert!(model.combine(&DVector::from_vec(vec![0.5, 0.6])).is_err());
        assert!(model.combine_affine(&DVector::from_vec(vec![1.2, -0.2])).is_ok());
    }

    #[test]
    fn nominal_mass_is_one() {
        let model = drone_like();
        let (a, b) = model.nominal();
        assert_relative_eq!(a[(1, 1)], 0.9, epsilon = 1e-12);
        assert_relative_eq!(b[(0, 0)], 0.5, epsilon = 1e-12);
        assert_relative_eq!(b[(1, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn step_from_rest_with_full_thrust() {
        let model = drone_like();
        let x = model
            .step(
                &DVector::zeros(2),
                &DVector::from_element(1, 5.0),
                model.alpha_hat(),
                &DVector::zeros(2),
                None,
            )
            .unwrap();
        assert_relative_eq!(x, DVector::from_vec(vec![2.5, 5.0]), epsilon = 1e-12);
        let err = model
            .step(
                &DVector::zeros(2),
                &DVector::from_element(1, 5.5),
                model.alpha_hat(),
                &DVector::zeros(2),
                None,
            )
            .unwrap_err();
        assert_eq!(err.to_string(), "input outside control polytope");
    }

    #[test]
    fn singular_nominal_matrix_is_rejected() {
        let res = ParametricLinearModel::new(
            vec![DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])],
            vec![DMatrix::identity(2, 1)],
            DVector::from_element(1, 1.0),
            VPolytope::from_rows(&[vec![0.0]]).unwrap(),
        );
        assert!(matches!(res, Err(Error::IllConditioned(_))));
    }

    #[test]
    fn identity_reach_set_with_fixed_input() {
        let model = ParametricLinearModel::new(
            vec![DMatrix::identity(2, 2)],
            vec![DMatrix::identity(2, 2)],
            DVector::from_element(1, 1.0),
            VPolytope::from_rows(&[vec![0.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let t = HyperRectangle::new(vec![-0.1, -0.1], vec![0.1, 0.1]).unwrap();
        let reach = model.backward_reach_set(&t.to_vpolytope()).unwrap();
        assert_eq!(reach.bounding_box(), t);
    }

    #[test]
    fn identity_reach_set_with_box_input() {
        let model = ParametricLinearModel::new(
            vec![DMatrix::identity(2, 2)],
            vec![DMatrix::identity(2, 2)],
            DVector::from_element(1, 1.0),
            HyperRectangle::new(vec![-1.0, -1.0], vec![1.0, 1.0])
                .unwrap()
                .to_vpolytope(),
        )
        .unwrap();
        let t = HyperRectangle::new(vec![-0.1, -0.1], vec![0.1, 0.1]).unwrap();
        let reach = model.backward_reach_set(&t.to_vpolytope()).unwrap();
        let bb = reach.bounding_box();
        for d in 0..2 {
            assert_relative_eq!(bb.lower()[d], -1.1, epsilon = 1e-12);
            assert_relative_eq!(bb.upper()[d], 1.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn error_hull_vanishes_without_uncertainty() {
        let region = HyperRectangle::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let single = drone_like().nominal_only();
        let hull = single.epistemic_error_hull(&region).unwrap();
        assert_eq!(hull.vertices().len(), 1);
        assert!(hull.vertices()[0].amax() < 1e-15);

        let base = drone_like();
        let (a, b) = base.nominal();
        let repeated = ParametricLinearModel::new(
            vec![a.clone(), a.clone()],
            vec![b.clone(), b.clone()],
            DVector::from_vec(vec![0.5, 0.5]),
            VPolytope::from_rows(&[vec![-5.0], vec![5.0]]).unwrap(),
        )
        .unwrap();
        let hull = repeated.epistemic_error_hull(&region).unwrap();
        assert!(hull.vertices().iter().all(|v| v.amax() < 1e-15));
    }

    #[test]
    fn error_box_matches_hull_envelope() {
        let model = drone_like()
            .with_disturbance(HyperRectangle::new(vec![-0.1, 0.0], vec![0.2, 0.0]).unwrap())
            .unwrap();
        let region = HyperRectangle::new(vec![-3.0, 1.0], vec![-2.0, 2.0]).unwrap();
        let direct = model.epistemic_error_box(&region).unwrap();
        let from_hull = model.epistemic_error_hull(&region).unwrap().bounding_box();
        for d in 0..2 {
            assert_relative_eq!(direct.lower()[d], from_hull.lower()[d], epsilon = 1e-12);
            assert_relative_eq!(direct.upper()[d], from_hull.upper()[d], epsilon = 1e-12);
        }
    }

    #[test]
    fn noise_streams_are_reproducible_and_distinct() {
        let spec = NoiseSpec::gaussian_diagonal(&[1.0, 4.0]);
        let a = spec.source(7, 3).unwrap().draw(5);
        let b = spec.source(7, 3).unwrap().draw(5);
        let c = spec.source(7, 4).unwrap().draw(5);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn replay_cycles_through_buffer() {
        let samples = vec![DVector::from_element(1, 1.0), DVector::from_element(1, 2.0)];
        let mut src = NoiseSpec::Replay {
            samples: samples.clone(),
        }
        .source(0, 0)
        .unwrap();
        let got = src.draw(3);
        assert_eq!(got, vec![samples[0].clone(), samples[1].clone(), samples[0].clone()]);
    }
}
