//! Isolation filters that cancel the interaction channel from a local
//! residual, built from an unknown-input observer on `M_i G_{y_i v_i}`,
//! plus the second-order Bessel noise filter.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lti::linalg::{column_compress, rank_rel, singular_values, C64};
use crate::lti::{block_diag, freq_response, spectral_abscissa, left_invertible, normal_rank, series, StateSpace};
use crate::netsys::{Interconnection, Port, Subsystem};
use crate::resgen::realize_mi;
use crate::riccati::design_observer_gain;

/// −3 dB frequency of the unit-ω₀ second-order Bessel prototype.
pub const BESSEL2_CUTOFF_RATIO: f64 = 1.361654;
const COMPRESS_TOL: f64 = 1e-10;
const DECOUPLING_TOL: f64 = 1e-8;
const UIO_MARGIN: f64 = 1e-6;

/// Decoupling check `rank [G_ya  G_yv] = dim a + rank G_yv`.
pub fn check_isolation_existence(sub: &Subsystem) -> Result<bool> {
    if sub.dim_a() == 0 {
        return Ok(true);
    }
    if sub.dim_v() == 0 {
        return Ok(normal_rank(&sub.local_map(Port::A, Port::Y))? == sub.dim_a());
    }
    let rank_v = normal_rank(&sub.local_map(Port::V, Port::Y))?;
    // Inputs of the realization are ordered [r; a; v].
    let (dr, da, dv) = (sub.dim_r(), sub.dim_a(), sub.dim_v());
    let cols: Vec<usize> = (dr..dr + da + dv).collect();
    let rows: Vec<usize> = (0..sub.dim_y()).collect();
    let joint = sub.realization().select_inputs(&cols)?.select_outputs(&rows)?;
    Ok(normal_rank(&joint)? == da + rank_v)
}

/// Whether `T_{v_i a_{-i}}` is right invertible, in which case the
/// existence condition is also necessary. Returns `None` when subsystem
/// `i` has no interaction input or no other subsystem carries an attack.
pub fn necessity_applies(subs: &[Subsystem], l: &Interconnection, set: &[usize], i: usize) -> Result<Option<bool>> {
    let sys = crate::netsys::assemble(subs, l, set)?;
    let layout = crate::netsys::PortLayout::new(subs, set);
    let pos = layout
        .position(i)
        .ok_or_else(|| Error::Invalid(format!("subsystem {i} not in the index set")))?;
    let (v_off, v_len) = layout.v[pos];
    let cols: Vec<usize> = layout
        .a
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != pos)
        .flat_map(|(_, &(o, len))| o..o + len)
        .collect();
    if v_len == 0 || cols.is_empty() {
        return Ok(None);
    }
    let rows: Vec<usize> = (v_off..v_off + v_len).collect();
    let t = sys.select_inputs(&cols)?.select_outputs(&rows)?;
    Ok(Some(normal_rank(&t)? == v_len))
}

/// Unknown-input observer `ż = F z + K ỹ`, `ẑ = z + H̃ ỹ` for
/// `ζ̇ = Ã ζ + Ũ d`, `ỹ = C̃ ζ`.
#[derive(Debug, Clone)]
pub struct UioDesign {
    pub h_tilde: DMatrix<f64>,
    pub f_tilde: DMatrix<f64>,
    pub k_tilde: DMatrix<f64>,
    pub a_tilde: DMatrix<f64>,
    /// Column-compressed unknown-input matrix the design was built on.
    pub u_tilde: DMatrix<f64>,
    pub c_tilde: DMatrix<f64>,
    /// Extra output injection used when `F̃` is unstable.
    pub feedback_gain: Option<DMatrix<f64>>,
}

impl UioDesign {
    /// Closed observer matrix `F = F̃ − K_fb C̃`.
    pub fn f(&self) -> DMatrix<f64> {
        match &self.feedback_gain {
            Some(k) => &self.f_tilde - k * &self.c_tilde,
            None => self.f_tilde.clone(),
        }
    }

    /// Input matrix `K = K_fb + F H̃`.
    pub fn k(&self) -> DMatrix<f64> {
        match &self.feedback_gain {
            Some(k) => k + self.f() * &self.h_tilde,
            None => self.k_tilde.clone(),
        }
    }

    /// Filter `ỹ ↦ ỹ − C̃ ẑ`: `(F, K, −C̃, I − C̃H̃)`.
    pub fn residual_filter(&self) -> Result<StateSpace> {
        let p = self.c_tilde.nrows();
        StateSpace::new(
            self.f(),
            self.k(),
            -self.c_tilde.clone(),
            DMatrix::identity(p, p) - &self.c_tilde * &self.h_tilde,
        )
    }
}

pub fn build_uio(a_t: &DMatrix<f64>, u_t: &DMatrix<f64>, c_t: &DMatrix<f64>) -> Result<UioDesign> {
    let n = a_t.nrows();
    if a_t.ncols() != n || u_t.nrows() != n || c_t.ncols() != n {
        return Err(Error::Dimension("UIO data dimensions".into()));
    }
    let (basis, _) = column_compress(u_t, COMPRESS_TOL);
    let cu = c_t * &basis;
    let k = basis.ncols();
    if rank_rel(&singular_values(&cu), COMPRESS_TOL) < k {
        return Err(Error::Isolation("C̃Ũ is not left invertible".into()));
    }
    let gram = cu.transpose() * &cu;
    let inv = gram
        .try_inverse()
        .ok_or_else(|| Error::Isolation("C̃Ũ Gram matrix is singular".into()))?;
    let h_tilde = &basis * inv * cu.transpose();
    let f_tilde = a_t - &h_tilde * c_t * a_t;
    let k_tilde = &f_tilde * &h_tilde;
    // F̃ = (I − H̃C̃)Ã carries exact zero eigenvalues from the projector, so
    // "Hurwitz" needs a margin or rounding decides it.
    let margin = UIO_MARGIN * f_tilde.norm().max(1.0);
    let feedback_gain = if n == 0 || spectral_abscissa(&f_tilde)? < -margin {
        None
    } else {
        let gain = design_observer_gain(&f_tilde, c_t, 1.0, 1.0).map_err(|e| match e {
            Error::NotDetectable(msg) => Error::Isolation(format!("(F̃, C̃) is not detectable: {msg}")),
            other => other,
        })?;
        Some(gain)
    };
    Ok(UioDesign {
        h_tilde,
        f_tilde,
        k_tilde,
        a_tilde: a_t.clone(),
        u_tilde: basis,
        c_tilde: c_t.clone(),
        feedback_gain,
    })
}

/// Series realization of `M_i G_{y_i v_i}`:
/// `Ã = [[A, 0], [HC, A − HC]]`, `Ũ = [U; 0]`, `C̃ = [C, −C]`.
pub fn interaction_realization(sub: &Subsystem, h: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let m = sub.matrices();
    if m.v.iter().any(|&x| x != 0.0) {
        return Err(Error::Isolation("interaction enters the output directly (V ≠ 0)".into()));
    }
    let g = series(&sub.local_map(Port::V, Port::Y), &realize_mi(sub, h)?)?;
    let (a, b, c, _) = g.into_parts();
    Ok((a, b, c))
}

/// Isolation filter `S_i` for a generator with gain `h` (zero for naive).
pub fn build_isolation_filter(sub: &Subsystem, h: &DMatrix<f64>) -> Result<StateSpace> {
    if !check_isolation_existence(sub)? {
        return Err(Error::Isolation(
            "rank [G_ya G_yv] < dim a + rank G_yv: attack and interaction cannot be separated".into(),
        ));
    }
    let p = sub.dim_y();
    if sub.dim_v() == 0 {
        return Ok(StateSpace::identity(p));
    }
    let (a_t, u_t, c_t) = interaction_realization(sub, h)?;
    let s = build_uio(&a_t, &u_t, &c_t)?.residual_filter()?;
    post_check(sub, h, &s)?;
    Ok(s)
}

fn post_check(sub: &Subsystem, h: &DMatrix<f64>, s: &StateSpace) -> Result<()> {
    let mi = realize_mi(sub, h)?;
    let mgv = series(&sub.local_map(Port::V, Port::Y), &mi)?;
    let smgv = series(&mgv, s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x150);
    for _ in 0..10 {
        let freq = C64::new(rng.random_range(0.1..1.0), rng.random_range(-10.0..10.0));
        let val = freq_response(&smgv, freq)?;
        let scale = freq_response(&mgv, freq)?.norm().max(1.0);
        if val.norm() > DECOUPLING_TOL * scale {
            return Err(Error::Isolation(format!(
                "interaction not cancelled: |S M G_yv| = {:.3e} at s = {freq}",
                val.norm()
            )));
        }
    }
    if sub.dim_a() > 0 {
        let smga = series(&series(&sub.local_map(Port::A, Port::Y), &mi)?, s)?;
        if !left_invertible(&smga)? {
            return Err(Error::Isolation("filtered attack channel lost left invertibility".into()));
        }
    }
    Ok(())
}

/// Second-order Bessel low-pass with −3 dB point at `cutoff_hz`.
pub fn design_bessel2(cutoff_hz: f64) -> Result<StateSpace> {
    if !(cutoff_hz > 0.0 && cutoff_hz.is_finite()) {
        return Err(Error::Invalid(format!("cutoff must be positive, got {cutoff_hz}")));
    }
    let w0 = 2.0 * PI * cutoff_hz / BESSEL2_CUTOFF_RATIO;
    let w2 = w0 * w0;
    StateSpace::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -3.0 * w2, -3.0 * w0]),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        DMatrix::from_row_slice(1, 2, &[3.0 * w2, 0.0]),
        DMatrix::zeros(1, 1),
    )
}

/// `Ψ · S`, with a scalar noise filter replicated across the output channels of `S`.
pub fn cascade_filters(s_iso: &StateSpace, s_noise: &StateSpace) -> Result<StateSpace> {
    let p = s_iso.noutputs();
    let noise = if s_noise.ninputs() == 1 && s_noise.noutputs() == 1 && p != 1 {
        block_diag(&vec![s_noise.clone(); p])?
    } else {
        s_noise.clone()
    };
    if noise.ninputs() != p {
        return Err(Error::Dimension(format!(
            "noise filter has {} inputs, isolation filter has {p} outputs",
            noise.ninputs()
        )));
    }
    series(s_iso, &noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{dc_gain, is_hurwitz, simulate, SignalTrace};
    use crate::lti::linalg::{hstack, vstack};
    use crate::netsys::SubsystemMatrices;
    use nalgebra::DVector;

    fn toy() -> Subsystem {
        // Two states, v drives state 0, a drives state 1, both measured.
        let mut m = SubsystemMatrices::zeros(2, 0, 1, 1, 2, 0);
        m.a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.2, -2.0]);
        m.u = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        m.x = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        m.c = DMatrix::identity(2, 2);
        Subsystem::new(m).unwrap()
    }

    #[test]
    fn existence_cases() {
        assert!(check_isolation_existence(&toy()).unwrap());
        // Attack and interaction through the same column.
        let mut m = toy().matrices().clone();
        m.x = m.u.clone();
        assert!(!check_isolation_existence(&Subsystem::new(m).unwrap()).unwrap());
        // No interaction at all.
        let mut m = SubsystemMatrices::zeros(1, 0, 0, 1, 1, 0);
        m.a[(0, 0)] = -1.0;
        m.x[(0, 0)] = 1.0;
        m.c[(0, 0)] = 1.0;
        assert!(check_isolation_existence(&Subsystem::new(m).unwrap()).unwrap());
    }

    #[test]
    fn toy_filter_cancels_interaction() {
        let sub = toy();
        let h = design_observer_gain(&sub.matrices().a, &sub.matrices().c, 1.0, 1.0).unwrap();
        let s = build_isolation_filter(&sub, &h).unwrap();
        let mi = realize_mi(&sub, &h).unwrap();
        let smgv = series(&series(&sub.local_map(Port::V, Port::Y), &mi).unwrap(), &s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let z = C64::new(rng.random_range(-0.5..2.0), rng.random_range(-20.0..20.0));
            assert!(freq_response(&smgv, z).unwrap().norm() < 1e-9);
        }
    }

    #[test]
    fn projector_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let a = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
            let u = DMatrix::from_fn(4, 2, |_, _| rng.random_range(-1.0..1.0));
            let c = DMatrix::from_fn(3, 4, |_, _| rng.random_range(-1.0..1.0));
            let d = build_uio(&a, &u, &c).unwrap();
            let cu = &c * &u;
            assert!((&d.h_tilde * &cu - &u).amax() < 1e-12);
            let p = DMatrix::<f64>::identity(3, 3) - &c * &d.h_tilde;
            assert!((p * cu).amax() < 1e-12);
            assert!(is_hurwitz(&d.f(), 0.0).unwrap());
        }
    }

    #[test]
    fn square_cu_gives_exact_projector() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -2.0]);
        let u = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let d = build_uio(&a, &u, &c).unwrap();
        assert!((&d.h_tilde * &c * &u - &u).amax() < 1e-15);
    }

    #[test]
    fn a1_violation_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let u = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert!(matches!(build_uio(&a, &u, &c), Err(Error::Isolation(_))));
    }

    #[test]
    fn uio_tracks_under_unknown_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0)) - DMatrix::identity(3, 3) * 1.5;
        let u = DMatrix::from_fn(3, 1, |_, _| rng.random_range(-1.0..1.0));
        let c = DMatrix::from_fn(2, 3, |_, _| rng.random_range(-1.0..1.0));
        let d = build_uio(&a, &u, &c).unwrap();
        // State [ζ; z], input d, output ζ − ẑ = (I − H̃C̃)ζ − z.
        let (f, k) = (d.f(), d.k());
        let mut big = DMatrix::zeros(6, 6);
        big.view_mut((0, 0), (3, 3)).copy_from(&a);
        big.view_mut((3, 0), (3, 3)).copy_from(&(&k * &c));
        big.view_mut((3, 3), (3, 3)).copy_from(&f);
        let b = vstack(&[&u, &DMatrix::zeros(3, 1)]);
        let out = hstack(&[&(DMatrix::identity(3, 3) - &d.h_tilde * &c), &(-DMatrix::<f64>::identity(3, 3))]);
        let sys = StateSpace::new(big, b, out, DMatrix::zeros(3, 1)).unwrap();
        let input = SignalTrace::from_fn(0.01, 2000, 1, |t| vec![3.0 * (1.7 * t).sin() + (t * 0.3).cos()]).unwrap();
        let (err, _) = simulate(&sys, &input, &DVector::zeros(6)).unwrap();
        assert!(err.samples().amax() < 1e-9);
        // Initial mismatch decays at the rate of F.
        let mut x0 = DVector::zeros(6);
        x0[0] = 1e-3;
        let (err, _) = simulate(&sys, &input, &x0).unwrap();
        let last = err.len() - 1;
        assert!(err.norm_at(last) < 1e-6);
    }

    #[test]
    fn unstable_f_tilde_gets_feedback() {
        let a = DMatrix::from_row_slice(3, 3, &[0.5, 1.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, -2.0]);
        let u = DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 1.0]);
        let c = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let d = build_uio(&a, &u, &c).unwrap();
        assert!(!is_hurwitz(&d.f_tilde, 0.0).unwrap());
        assert!(d.feedback_gain.is_some());
        assert!(is_hurwitz(&d.f(), 0.0).unwrap());
        assert!(((DMatrix::<f64>::identity(2, 2) - &c * &d.h_tilde) * &c * &u).amax() < 1e-12);
    }

    #[test]
    fn bessel_properties() {
        let b = design_bessel2(1.0).unwrap();
        assert!((dc_gain(&b).unwrap()[(0, 0)] - 1.0).abs() < 1e-12);
        let g = freq_response(&b, C64::new(0.0, 2.0 * PI)).unwrap()[(0, 0)];
        assert!((g.norm() - 0.5f64.sqrt()).abs() < 1e-3);
        assert!(is_hurwitz(b.a(), 0.0).unwrap());
        assert!(design_bessel2(0.0).is_err());
    }

    #[test]
    fn cascade_cases() {
        let b = design_bessel2(2.0).unwrap();
        let s = C64::new(0.1, 3.0);
        let c = cascade_filters(&StateSpace::identity(1), &b).unwrap();
        assert!((freq_response(&c, s).unwrap() - freq_response(&b, s).unwrap()).norm() < 1e-14);
        // Replicated across channels and still cancelling the interaction.
        let sub = toy();
        let h = DMatrix::zeros(2, 2);
        let iso = build_isolation_filter(&sub, &h).unwrap();
        let both = cascade_filters(&iso, &b).unwrap();
        assert_eq!(both.noutputs(), 2);
        let mi = realize_mi(&sub, &h).unwrap();
        let path = series(&series(&sub.local_map(Port::V, Port::Y), &mi).unwrap(), &both).unwrap();
        assert!(freq_response(&path, s).unwrap().norm() < 1e-9);
        let apath = series(&series(&sub.local_map(Port::A, Port::Y), &mi).unwrap(), &both).unwrap();
        assert_eq!(normal_rank(&apath).unwrap(), 1);
    }
}
