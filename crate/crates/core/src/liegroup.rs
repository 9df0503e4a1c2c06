//! SE(2) machinery and entropy-rate computation over the distribution of
//! (radius, occurrence) group elements across failure events.
//!
//! With the rotation coefficient fixed to zero all group elements are pure
//! translations, so the invariant integral reduces to the translation plane
//! and the entropy estimator works on a 2-D histogram of the log
//! coordinates. The rotation part is still carried because the group law
//! and the Lie-derivative flows reference it.

use nalgebra::Matrix3;

use crate::error::{Error, Result};

const BOTTOM_ROW_TOL: f64 = 1e-12;
const ROTATION_TOL: f64 = 1e-9;

/// A validated element of SE(2) as a 3x3 homogeneous matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Se2Element {
    matrix: Matrix3<f64>,
}

impl Se2Element {
    pub fn new(matrix: Matrix3<f64>) -> Result<Self> {
        for (j, expected) in [(0, 0.0), (1, 0.0), (2, 1.0)] {
            if (matrix[(2, j)] - expected).abs() > BOTTOM_ROW_TOL {
                return Err(Error::LieGroup(format!(
                    "bottom row entry ({j}) = {} is not {expected}",
                    matrix[(2, j)]
                )));
            }
        }
        let r = matrix.fixed_view::<2, 2>(0, 0);
        let gram = r.transpose() * r;
        let ortho = (gram - nalgebra::Matrix2::identity()).abs().max();
        let det = r[(0, 0)] * r[(1, 1)] - r[(0, 1)] * r[(1, 0)];
        if ortho > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::LieGroup(format!(
                "upper-left block is not a rotation (orthogonality error {ortho}, det {det})"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn identity() -> Self {
        Self { matrix: Matrix3::identity() }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    /// Group composition (matrix product).
    pub fn compose(&self, other: &Se2Element) -> Result<Se2Element> {
        Se2Element::new(self.matrix * other.matrix)
    }

    /// Translation part (a, b).
    pub fn translation(&self) -> (f64, f64) {
        (self.matrix[(0, 2)], self.matrix[(1, 2)])
    }

    /// Rotation angle in (-pi, pi].
    pub fn angle(&self) -> f64 {
        let theta = self.matrix[(1, 0)].atan2(self.matrix[(0, 0)]);
        if theta <= -std::f64::consts::PI {
            std::f64::consts::PI
        } else {
            theta
        }
    }
}

/// Lie-algebra coefficients of a X1 + b X2 + theta X3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgebraCoeffs {
    pub a: f64,
    pub b: f64,
    pub theta: f64,
}

impl AlgebraCoeffs {
    pub fn new(a: f64, b: f64, theta: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && theta.is_finite()) {
            return Err(Error::LieGroup(format!(
                "non-finite coefficients ({a}, {b}, {theta})"
            )));
        }
        Ok(Self { a, b, theta })
    }
}

/// Basis matrices of the Lie algebra: X1 = E13, X2 = E23, X3 the rotation
/// generator.
pub fn basis(i: usize) -> Result<Matrix3<f64>> {
    let mut m = Matrix3::zeros();
    match i {
        1 => m[(0, 2)] = 1.0,
        2 => m[(1, 2)] = 1.0,
        3 => {
            m[(0, 1)] = -1.0;
            m[(1, 0)] = 1.0;
        }
        _ => return Err(Error::LieGroup(format!("basis index {i} not in {{1,2,3}}"))),
    }
    Ok(m)
}

/// Group exponential in the product form exp(a X1 + b X2) exp(theta X3).
/// X1 and X2 are nilpotent with vanishing products, so the first factor is
/// I + a X1 + b X2 exactly.
pub fn se2_exp(coeffs: AlgebraCoeffs) -> Se2Element {
    let (s, c) = coeffs.theta.sin_cos();
    let m = Matrix3::new(
        c, -s, coeffs.a, //
        s, c, coeffs.b, //
        0.0, 0.0, 1.0,
    );
    Se2Element { matrix: m }
}

/// Inverse of [`se2_exp`]: recover (a, b, theta) with theta in (-pi, pi].
pub fn se2_log(g: &Se2Element) -> Result<AlgebraCoeffs> {
    let (a, b) = g.translation();
    AlgebraCoeffs::new(a, b, g.angle())
}

/// The group function of one failure event: a translation by the domain
/// radius and the occurrence value (rotation constant fixed to zero).
pub fn group_function(radius: f64, occurrence: f64) -> Result<Se2Element> {
    let coeffs = AlgebraCoeffs::new(radius, occurrence, 0.0)?;
    Ok(se2_exp(coeffs))
}

/// Weighted samples of group elements, one per failure event.
#[derive(Debug, Clone)]
pub struct GroupSampleSet {
    samples: Vec<(Se2Element, f64)>,
}

impl GroupSampleSet {
    pub fn new(samples: Vec<(Se2Element, f64)>) -> Result<Self> {
        if samples.iter().any(|(_, w)| !(*w >= 0.0)) {
            return Err(Error::LieGroup("sample weights must be >= 0".into()));
        }
        let sum: f64 = samples.iter().map(|(_, w)| w).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::LieGroup(format!("weights sum to {sum}, expected 1")));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[(Se2Element, f64)] {
        &self.samples
    }
}

/// Histogram differential entropy with a degeneracy flag.
#[derive(Debug, Clone, Copy)]
pub struct EntropyResult {
    pub value: f64,
    /// Set when all mass landed in a single cell.
    pub degenerate: bool,
}

/// Histogram-based differential entropy over the (a, b) log-coordinates:
/// -sum p log(p / cell_area). Natural logarithm.
pub fn entropy_rate(samples: &GroupSampleSet, bin_widths: (f64, f64)) -> Result<EntropyResult> {
    let (da, db) = bin_widths;
    if !(da > 0.0 && db > 0.0) {
        return Err(Error::LieGroup(format!("bin widths ({da}, {db}) must be > 0")));
    }
    if samples.samples().len() < 2 {
        return Err(Error::LieGroup("entropy needs at least 2 samples".into()));
    }
    let mut cells: std::collections::HashMap<(i64, i64), f64> = std::collections::HashMap::new();
    let mut total = 0.0;
    for (g, w) in samples.samples() {
        if *w == 0.0 {
            continue;
        }
        let coeffs = se2_log(g)?;
        let key = ((coeffs.a / da).floor() as i64, (coeffs.b / db).floor() as i64);
        *cells.entry(key).or_insert(0.0) += w;
        total += w;
    }
    let cell_area = da * db;
    let mut value = 0.0;
    for &p in cells.values() {
        let p = p / total;
        value -= p * (p / cell_area).ln();
    }
    Ok(EntropyResult { value, degenerate: cells.len() < 2 })
}

/// Trapezoidal accumulation of per-event entropies over the event index.
pub fn entropy_rate_total(
    per_event_sets: &[GroupSampleSet],
    bin_widths: (f64, f64),
) -> Result<f64> {
    if per_event_sets.is_empty() {
        return Err(Error::LieGroup("at least one event required".into()));
    }
    let values: Vec<f64> = per_event_sets
        .iter()
        .map(|s| entropy_rate(s, bin_widths).map(|r| r.value))
        .collect::<Result<_>>()?;
    Ok(trapezoid(&values))
}

/// Trapezoid rule over unit-spaced event indices; a single point is its own
/// value.
pub fn trapezoid(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        _ => values.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum(),
    }
}

/// Finite-difference derivative of the per-event entropy sequence at the
/// 1-based event index `f`: central inside, one-sided at the boundaries.
pub fn entropy_rate_derivative(entropies: &[f64], f: usize) -> Result<f64> {
    let m = entropies.len();
    if f < 1 || f > m {
        return Err(Error::LieGroup(format!("event index {f} outside 1..={m}")));
    }
    if m == 1 {
        return Ok(0.0);
    }
    let i = f - 1;
    Ok(if i == 0 {
        entropies[1] - entropies[0]
    } else if i == m - 1 {
        entropies[m - 1] - entropies[m - 2]
    } else {
        (entropies[i + 1] - entropies[i - 1]) / 2.0
    })
}

/// Central-difference Lie derivative of a density along the flow of basis
/// direction `i` at `g`.
pub fn lie_derivative<F>(pdf: F, g: &Se2Element, i: usize, step: f64) -> Result<f64>
where
    F: Fn(&Se2Element) -> f64,
{
    if !(step > 0.0) {
        return Err(Error::LieGroup(format!("step {step} must be > 0")));
    }
    let x = basis(i)?;
    let flow = |t: f64| -> Result<f64> {
        // exp(t X_i) for each basis direction separately
        let exp = match i {
            1 => se2_exp(AlgebraCoeffs { a: t, b: 0.0, theta: 0.0 }),
            2 => se2_exp(AlgebraCoeffs { a: 0.0, b: t, theta: 0.0 }),
            _ => se2_exp(AlgebraCoeffs { a: 0.0, b: 0.0, theta: t }),
        };
        debug_assert!((exp.matrix() - (Matrix3::identity() + x * t)).abs().max() <= t * t + 1e-12);
        let v = pdf(&g.compose(&exp)?);
        if !v.is_finite() {
            return Err(Error::LieGroup(format!("pdf value {v} is not finite")));
        }
        Ok(v)
    };
    Ok((flow(step)? - flow(-step)?) / (2.0 * step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn basis_matrices_match_printed_form() {
        let x1 = basis(1).unwrap();
        assert_eq!(x1[(0, 2)], 1.0);
        assert_eq!(x1.iter().filter(|&&v| v != 0.0).count(), 1);
        let x3 = basis(3).unwrap();
        assert_eq!(x3[(0, 1)], -1.0);
        assert_eq!(x3[(1, 0)], 1.0);
        // antisymmetric in the 2x2 block
        assert_eq!(x3[(0, 1)], -x3[(1, 0)]);
        assert!(basis(4).is_err());
        // [X1, X2] = 0
        let x2 = basis(2).unwrap();
        assert_eq!(x1 * x2 - x2 * x1, nalgebra::Matrix3::zeros());
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let g = se2_exp(AlgebraCoeffs { a: 0.0, b: 0.0, theta: 0.0 });
        assert_eq!(*g.matrix(), Matrix3::identity());
    }

    #[test]
    fn nilpotent_translation_is_exact() {
        let (a, b) = (2.5, -1.75);
        let g = se2_exp(AlgebraCoeffs { a, b, theta: 0.0 });
        let expected =
            Matrix3::identity() + basis(1).unwrap() * a + basis(2).unwrap() * b;
        assert_eq!(*g.matrix(), expected);
        assert_eq!(g.translation(), (a, b));
    }

    #[test]
    fn quarter_turn_rotation_block() {
        let g = se2_exp(AlgebraCoeffs { a: 0.0, b: 0.0, theta: FRAC_PI_2 });
        let m = g.matrix();
        assert!(m[(0, 0)].abs() < 1e-15);
        assert!((m[(0, 1)] + 1.0).abs() < 1e-15);
        assert!((m[(1, 0)] - 1.0).abs() < 1e-15);
        assert!(m[(1, 1)].abs() < 1e-15);
    }

    #[test]
    fn log_inverts_exp() {
        assert_eq!(
            se2_log(&Se2Element::identity()).unwrap(),
            AlgebraCoeffs { a: 0.0, b: 0.0, theta: 0.0 }
        );
        let c = AlgebraCoeffs { a: 1.5, b: -0.3, theta: 0.0 };
        assert_eq!(se2_log(&se2_exp(c)).unwrap(), c);
    }

    #[test]
    fn exp_log_round_trip_over_random_elements() {
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (rng_state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let c = AlgebraCoeffs {
                a: (next() - 0.5) * 20.0,
                b: (next() - 0.5) * 20.0,
                theta: (next() - 0.5) * 1.999 * PI,
            };
            let g = se2_exp(c);
            let back = se2_exp(se2_log(&g).unwrap());
            worst = worst.max((g.matrix() - back.matrix()).abs().max());
        }
        assert!(worst < 1e-9, "round-trip error {worst}");
    }

    #[test]
    fn angle_pi_maps_to_pi() {
        let g = se2_exp(AlgebraCoeffs { a: 0.0, b: 0.0, theta: PI });
        assert!((se2_log(&g).unwrap().theta.abs() - PI).abs() < 1e-12);
    }

    #[test]
    fn group_function_translations_compose_additively() {
        let g = group_function(2.0, 0.5).unwrap();
        assert_eq!(g.translation(), (2.0, 0.5));
        let h = group_function(1.25, 0.25).unwrap();
        let gh = g.compose(&h).unwrap();
        let sum = group_function(3.25, 0.75).unwrap();
        assert_eq!(gh, sum);
        // commutative in the c = 0 case
        assert_eq!(h.compose(&g).unwrap(), sum);
        assert_eq!(group_function(0.0, 0.0).unwrap(), Se2Element::identity());
    }

    #[test]
    fn composition_preserves_group_invariants() {
        let g = se2_exp(AlgebraCoeffs { a: 1.0, b: 2.0, theta: 0.7 });
        let h = se2_exp(AlgebraCoeffs { a: -0.5, b: 0.1, theta: -2.1 });
        // compose() revalidates; an Err here would mean closure failed
        g.compose(&h).unwrap();
    }

    fn uniform_set(points: &[(f64, f64)]) -> GroupSampleSet {
        let w = 1.0 / points.len() as f64;
        GroupSampleSet::new(
            points.iter().map(|&(a, b)| (group_function(a, b).unwrap(), w)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn point_mass_entropy_is_log_cell_area() {
        let set = uniform_set(&[(1.0, 1.0), (1.0, 1.0), (1.0, 1.0)]);
        let r = entropy_rate(&set, (0.2, 0.05)).unwrap();
        assert!(r.degenerate);
        assert!((r.value - (0.2f64 * 0.05).ln()).abs() < 1e-12);
    }

    #[test]
    fn uniform_cells_entropy_is_log_k_cell_area() {
        // 4 samples in 4 distinct cells with bin widths (1, 1)
        let set = uniform_set(&[(0.5, 0.5), (1.5, 0.5), (0.5, 1.5), (1.5, 1.5)]);
        let r = entropy_rate(&set, (1.0, 1.0)).unwrap();
        assert!(!r.degenerate);
        assert!((r.value - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_total_trapezoid() {
        assert_eq!(trapezoid(&[5.0]), 5.0);
        assert_eq!(trapezoid(&[2.0, 2.0, 2.0]), 4.0);
        assert_eq!(trapezoid(&[1.0, 2.0, 3.0]), 4.0);
        let set = uniform_set(&[(0.5, 0.5), (1.5, 1.5)]);
        let single = entropy_rate(&set, (1.0, 1.0)).unwrap().value;
        let total = entropy_rate_total(std::slice::from_ref(&set), (1.0, 1.0)).unwrap();
        assert_eq!(total, single);
    }

    #[test]
    fn derivative_cases() {
        assert_eq!(entropy_rate_derivative(&[3.0, 3.0, 3.0], 2).unwrap(), 0.0);
        assert_eq!(entropy_rate_derivative(&[1.0, 3.0, 5.0], 2).unwrap(), 2.0);
        assert_eq!(entropy_rate_derivative(&[0.0, 1.0, 4.0, 9.0], 3).unwrap(), 4.0);
        // one-sided at the boundaries
        assert_eq!(entropy_rate_derivative(&[1.0, 3.0, 5.0], 1).unwrap(), 2.0);
        assert_eq!(entropy_rate_derivative(&[1.0, 3.0, 5.0], 3).unwrap(), 2.0);
        assert!(entropy_rate_derivative(&[1.0, 2.0], 3).is_err());
        assert!(entropy_rate_derivative(&[1.0, 2.0], 0).is_err());
    }

    #[test]
    fn lie_derivative_of_coordinate_functions() {
        let constant = |_: &Se2Element| 0.7;
        let a_coord = |g: &Se2Element| g.translation().0;
        let g = group_function(1.0, 2.0).unwrap();
        for i in 1..=3 {
            assert!(lie_derivative(constant, &g, i, 1e-4).unwrap().abs() < 1e-12);
        }
        // right translation by exp(t X1) adds t to the a-coordinate at theta=0
        let d = lie_derivative(a_coord, &g, 1, 1e-4).unwrap();
        assert!((d - 1.0).abs() < 1e-7, "d = {d}");
        // X2 flow moves only the b-coordinate at the identity
        let d2 = lie_derivative(a_coord, &Se2Element::identity(), 2, 1e-4).unwrap();
        assert!(d2.abs() < 1e-7);
    }

    #[test]
    fn entropy_rejects_degenerate_inputs() {
        let set = uniform_set(&[(0.5, 0.5), (1.5, 1.5)]);
        assert!(entropy_rate(&set, (0.0, 1.0)).is_err());
        let single = GroupSampleSet::new(vec![(Se2Element::identity(), 1.0)]).unwrap();
        assert!(entropy_rate(&single, (1.0, 1.0)).is_err());
    }

    #[test]
    fn uniform_weights_maximize_entropy_over_occupied_cells() {
        // same occupied cells, random weight perturbations never beat uniform
        let points = [(0.5, 0.5), (1.5, 0.5), (0.5, 1.5), (1.5, 1.5)];
        let uniform = entropy_rate(&uniform_set(&points), (1.0, 1.0)).unwrap().value;
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..1000 {
            let raw: Vec<f64> = (0..4).map(|_| next() + 1e-9).collect();
            let sum: f64 = raw.iter().sum();
            let set = GroupSampleSet::new(
                points
                    .iter()
                    .zip(&raw)
                    .map(|(&(a, b), &w)| (group_function(a, b).unwrap(), w / sum))
                    .collect(),
            )
            .unwrap();
            let v = entropy_rate(&set, (1.0, 1.0)).unwrap().value;
            assert!(v <= uniform + 1e-12);
        }
    }
}
