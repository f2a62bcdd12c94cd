//! Second-order ODEs `r'' = a(r)` in the plane: kick-drift-kick leapfrog,
//! the Kepler problem with `G = M = 1`, and its closed-form solution.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub time: f64,
}

impl PhaseState {
    pub fn new(position: Vec2, velocity: Vec2, time: f64) -> Self {
        Self { position, velocity, time }
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.is_finite()) && self.time.is_finite()
    }

    /// `[x, y, vx, vy]`
    pub fn components(&self) -> [f64; 4] {
        [self.position[0], self.position[1], self.velocity[0], self.velocity[1]]
    }

    pub fn from_components(c: [f64; 4], time: f64) -> Self {
        Self { position: [c[0], c[1]], velocity: [c[2], c[3]], time }
    }

    pub fn radius(&self) -> f64 {
        norm(self.position)
    }
}

#[inline]
fn norm(v: Vec2) -> f64 {
    v[0].hypot(v[1])
}

/// Acceleration as a function of position only.
pub trait AccelerationField {
    fn accel(&self, position: Vec2) -> Result<Vec2>;
}

impl<F: Fn(Vec2) -> Vec2> AccelerationField for F {
    fn accel(&self, position: Vec2) -> Result<Vec2> {
        Ok(self(position))
    }
}

/// Point mass at the origin with `GM = 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kepler;

impl AccelerationField for Kepler {
    fn accel(&self, position: Vec2) -> Result<Vec2> {
        kepler_accel(position)
    }
}

/// `a = -ω² r`
#[derive(Debug, Clone, Copy)]
pub struct Harmonic {
    pub omega: f64,
}

impl AccelerationField for Harmonic {
    fn accel(&self, r: Vec2) -> Result<Vec2> {
        let w2 = self.omega * self.omega;
        Ok([-w2 * r[0], -w2 * r[1]])
    }
}

/// Zero acceleration.
#[derive(Debug, Clone, Copy, Default)]
pub struct FreeDrift;

impl AccelerationField for FreeDrift {
    fn accel(&self, _: Vec2) -> Result<Vec2> {
        Ok([0.0, 0.0])
    }
}

/// `-r / |r|³`
pub fn kepler_accel(r: Vec2) -> Result<Vec2> {
    let d = norm(r);
    if d == 0.0 {
        return Err(Error::SingularPosition);
    }
    let inv = 1.0 / (d * d * d);
    Ok([-r[0] * inv, -r[1] * inv])
}

#[inline]
fn kick_drift_kick(
    state: &PhaseState,
    accel: Vec2,
    dt: f64,
    field: &impl AccelerationField,
) -> Result<(PhaseState, Vec2)> {
    let half = 0.5 * dt;
    let vh = [state.velocity[0] + half * accel[0], state.velocity[1] + half * accel[1]];
    let r = [state.position[0] + dt * vh[0], state.position[1] + dt * vh[1]];
    let a = field.accel(r)?;
    let v = [vh[0] + half * a[0], vh[1] + half * a[1]];
    Ok((PhaseState::new(r, v, state.time + dt), a))
}

/// One kick-drift-kick leapfrog step.
pub fn leapfrog_step(state: &PhaseState, dt: f64, field: &impl AccelerationField) -> Result<PhaseState> {
    let a = field.accel(state.position)?;
    kick_drift_kick(state, a, dt, field).map(|(s, _)| s)
}

/// `n_steps` leapfrog steps of equal size from `state.time` to `t_end`.
pub fn integrate_fixed(
    field: &impl AccelerationField,
    state: &PhaseState,
    t_end: f64,
    n_steps: usize,
) -> Result<PhaseState> {
    if n_steps == 0 || !(t_end > state.time) {
        return Err(Error::InvalidConfig(format!(
            "need t_end > t and n_steps >= 1, got t = {}, t_end = {t_end}, n = {n_steps}",
            state.time
        )));
    }
    let dt = (t_end - state.time) / n_steps as f64;
    let mut s = *state;
    let mut a = field.accel(s.position)?;
    for _ in 0..n_steps {
        let (next, next_a) = kick_drift_kick(&s, a, dt, field)?;
        if !next.is_finite() {
            return Err(Error::NonFiniteState { time: next.time });
        }
        s = next;
        a = next_a;
    }
    s.time = t_end;
    Ok(s)
}

pub fn specific_energy(state: &PhaseState) -> Result<f64> {
    let r = state.radius();
    if r == 0.0 {
        return Err(Error::SingularPosition);
    }
    let v = state.velocity;
    Ok(0.5 * (v[0] * v[0] + v[1] * v[1]) - 1.0 / r)
}

/// Bound Kepler orbit with apoapsis at `(1, 0)` at `t = 0`, moving
/// counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeplerOrbit {
    pub eccentricity: f64,
}

impl KeplerOrbit {
    pub fn new(eccentricity: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eccentricity) {
            return Err(Error::InvalidConfig(format!("eccentricity must lie in [0, 1), got {eccentricity}")));
        }
        Ok(Self { eccentricity })
    }

    pub fn semi_major_axis(&self) -> f64 {
        1.0 / (1.0 + self.eccentricity)
    }

    pub fn period(&self) -> f64 {
        TAU * self.semi_major_axis().powf(1.5)
    }

    pub fn pericenter(&self) -> f64 {
        self.semi_major_axis() * (1.0 - self.eccentricity)
    }

    pub fn initial_state(&self) -> PhaseState {
        PhaseState::new([1.0, 0.0], [0.0, (1.0 - self.eccentricity).sqrt()], 0.0)
    }

    /// Exact state at time `t`.
    pub fn state_at(&self, t: f64) -> PhaseState {
        let e = self.eccentricity;
        let a = self.semi_major_axis();
        let n = TAU / self.period();
        // Mean anomaly measured from pericenter; the orbit starts at apoapsis.
        let mean = (PI + n * t).rem_euclid(TAU);
        let ecc = solve_kepler(mean, e);
        let (sin_e, cos_e) = ecc.sin_cos();
        let b = a * (1.0 - e * e).sqrt();
        let e_dot = n / (1.0 - e * cos_e);
        // Perifocal frame has pericenter on +x; the orbit's pericenter is on -x.
        let px = a * (cos_e - e);
        let py = b * sin_e;
        let vx = -a * sin_e * e_dot;
        let vy = b * cos_e * e_dot;
        PhaseState::new([-px, -py], [-vx, -vy], t)
    }
}

/// Solves `M = E - e sin E` for `E` in `[0, 2π)`, given `M` in `[0, 2π)`.
///
/// Newton from `E = M`, kept inside the bracket `[0, 2π]`; falls back to
/// bisection if Newton has not met the tolerance after 50 iterations.
pub fn solve_kepler(mean: f64, e: f64) -> f64 {
    const TOL: f64 = 1e-13;
    let f = |x: f64| x - e * x.sin() - mean;
    let (mut lo, mut hi) = (0.0, TAU);
    let mut x = mean;
    for _ in 0..50 {
        let fx = f(x);
        if fx.abs() <= TOL {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let step = fx / (1.0 - e * x.cos());
        let next = x - step;
        x = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if step.abs() <= TOL {
            return x;
        }
    }
    while hi - lo > TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Initial state at apoapsis `(1, 0)` for eccentricity `e`: `v = (0, √(1 - e))`.
pub fn kepler_init(e: f64) -> Result<PhaseState> {
    Ok(KeplerOrbit::new(e)?.initial_state())
}

/// Exact two-body state at time `t` for the orbit started by [`kepler_init`].
pub fn kepler_reference(t: f64, e: f64) -> Result<PhaseState> {
    Ok(KeplerOrbit::new(e)?.state_at(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn assert_state_close(a: &PhaseState, b: &PhaseState, tol: f64) {
        for (x, y) in a.components().iter().zip(b.components()) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn kepler_accel_values() {
        assert_eq!(kepler_accel([1.0, 0.0]).unwrap(), [-1.0, 0.0]);
        assert_eq!(kepler_accel([0.0, 2.0]).unwrap(), [0.0, -0.25]);
        let a = kepler_accel([3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(a[0], -0.024, epsilon = 1e-16);
        assert_abs_diff_eq!(a[1], -0.032, epsilon = 1e-16);
        assert!(matches!(kepler_accel([0.0, 0.0]), Err(Error::SingularPosition)));
    }

    #[test]
    fn leapfrog_free_drift() {
        let s = PhaseState::new([0.0, 0.0], [1.0, 0.0], 0.0);
        let n = leapfrog_step(&s, 1.0, &FreeDrift).unwrap();
        assert_eq!(n.position, [1.0, 0.0]);
        assert_eq!(n.velocity, [1.0, 0.0]);
        assert_eq!(n.time, 1.0);
    }

    #[test]
    fn leapfrog_harmonic_hand_values() {
        let s = PhaseState::new([1.0, 0.0], [0.0, 0.0], 0.0);
        let n = leapfrog_step(&s, 0.1, &Harmonic { omega: 1.0 }).unwrap();
        assert_abs_diff_eq!(n.position[0], 0.995, epsilon = 1e-15);
        assert_abs_diff_eq!(n.velocity[0], -0.09975, epsilon = 1e-15);
        assert_eq!(n.position[1], 0.0);
    }

    #[test]
    fn leapfrog_local_error_is_third_order() {
        let field = Harmonic { omega: 1.0 };
        let s = PhaseState::new([1.0, 0.0], [0.0, 1.0], 0.0);
        let dts = [0.1, 0.05, 0.025];
        let errs: Vec<f64> = dts
            .iter()
            .map(|&dt| {
                let one = leapfrog_step(&s, dt, &field).unwrap();
                let two = integrate_fixed(&field, &s, dt, 2).unwrap();
                let d = [one.position[0] - two.position[0], one.position[1] - two.position[1]];
                norm(d)
            })
            .collect();
        let slope = (errs[0] / errs[2]).ln() / (dts[0] / dts[2]).ln();
        assert!((slope - 3.0).abs() <= 0.3, "slope {slope}");
    }

    #[test]
    fn integrate_fixed_drift_and_single_step() {
        let s = PhaseState::new([1.0, 2.0], [0.5, -0.25], 1.0);
        let n = integrate_fixed(&FreeDrift, &s, 3.0, 7).unwrap();
        assert_abs_diff_eq!(n.position[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(n.position[1], 1.5, epsilon = 1e-14);
        assert_eq!(n.time, 3.0);

        let field = Harmonic { omega: 1.3 };
        let a = integrate_fixed(&field, &s, 1.2, 1).unwrap().components();
        let b = leapfrog_step(&s, 0.2, &field).unwrap().components();
        for (x, y) in a.iter().zip(b) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-15);
        }
    }

    #[test]
    fn integrate_fixed_rejects_bad_arguments() {
        let s = PhaseState::new([1.0, 0.0], [0.0, 1.0], 1.0);
        assert!(integrate_fixed(&Kepler, &s, 1.0, 4).is_err());
        assert!(integrate_fixed(&Kepler, &s, 2.0, 0).is_err());
        let at_origin = PhaseState::new([0.0, 0.0], [0.0, 1.0], 0.0);
        assert!(matches!(integrate_fixed(&Kepler, &at_origin, 1.0, 4), Err(Error::SingularPosition)));
    }

    #[test]
    fn integrate_fixed_detects_blow_up() {
        let wild = |r: Vec2| [r[0].exp().exp(), 0.0];
        let s = PhaseState::new([1.0, 0.0], [0.0, 0.0], 0.0);
        assert!(matches!(integrate_fixed(&wild, &s, 10.0, 5), Err(Error::NonFiniteState { .. })));
    }

    #[test]
    fn circular_orbit_returns() {
        let s = kepler_init(0.0).unwrap();
        let n = integrate_fixed(&Kepler, &s, TAU, 10_000).unwrap();
        assert_abs_diff_eq!(n.position[0], 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(n.position[1], 0.0, epsilon = 1e-4);
    }

    #[test]
    fn init_values() {
        let s = kepler_init(0.0).unwrap();
        assert_eq!(s.velocity, [0.0, 1.0]);
        let s = kepler_init(0.99).unwrap();
        assert_eq!(s.position, [1.0, 0.0]);
        assert_abs_diff_eq!(s.velocity[1], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(specific_energy(&s).unwrap(), -0.995, epsilon = 1e-15);
        let orbit = KeplerOrbit::new(0.99).unwrap();
        assert_abs_diff_eq!(orbit.semi_major_axis(), 0.502_512_562_814_070_4, epsilon = 1e-15);
        assert_abs_diff_eq!(orbit.pericenter(), 0.005_025_125_628_140_704, epsilon = 1e-16);
        assert_abs_diff_eq!(orbit.period(), 2.238_207_021_027_204, epsilon = 1e-14);
        assert!(kepler_init(1.0).is_err());
        assert!(kepler_init(-0.1).is_err());
    }

    #[test]
    fn energy_values() {
        assert_abs_diff_eq!(specific_energy(&kepler_init(0.0).unwrap()).unwrap(), -0.5, epsilon = 1e-15);
        let s = PhaseState::new([2.0, 0.0], [0.0, 0.0], 0.0);
        assert_eq!(specific_energy(&s).unwrap(), -0.5);
        let origin = PhaseState::new([0.0, 0.0], [1.0, 0.0], 0.0);
        assert!(specific_energy(&origin).is_err());
    }

    #[test]
    fn reference_epoch_and_half_periods() {
        for e in [0.0, 0.3, 0.99] {
            let r = kepler_reference(0.0, e).unwrap();
            assert_state_close(&r, &kepler_init(e).unwrap(), 1e-14);
        }
        let r = kepler_reference(PI, 0.0).unwrap();
        assert_state_close(&r, &PhaseState::new([-1.0, 0.0], [0.0, -1.0], PI), 1e-12);

        let orbit = KeplerOrbit::new(0.99).unwrap();
        let r = orbit.state_at(0.5 * orbit.period());
        assert_abs_diff_eq!(r.position[0], -0.005_025_125_628_140_704, epsilon = 1e-9);
        assert_abs_diff_eq!(r.position[1], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn reference_velocity_matches_finite_difference() {
        let dt = 1e-6;
        for e in [0.0, 0.5, 0.9] {
            let orbit = KeplerOrbit::new(e).unwrap();
            for k in 0..20 {
                let t = 0.05 * orbit.period() * k as f64 + 0.01;
                let (a, b) = (orbit.state_at(t - dt), orbit.state_at(t + dt));
                let s = orbit.state_at(t);
                for i in 0..2 {
                    let fd = (b.position[i] - a.position[i]) / (2.0 * dt);
                    assert!((fd - s.velocity[i]).abs() <= 1e-5, "e={e} t={t}: {fd} vs {}", s.velocity[i]);
                }
            }
        }
    }

    #[test]
    fn reference_conserves_energy_and_angular_momentum() {
        let orbit = KeplerOrbit::new(0.99).unwrap();
        let h0 = 0.1;
        for k in 0..200 {
            let s = orbit.state_at(k as f64 * 0.0173);
            assert_abs_diff_eq!(specific_energy(&s).unwrap(), -0.995, epsilon = 1e-8);
            let h = s.position[0] * s.velocity[1] - s.position[1] * s.velocity[0];
            assert_abs_diff_eq!(h, h0, epsilon = 1e-9);
        }
    }

    #[test]
    fn kepler_solver_handles_high_eccentricity() {
        for &e in &[0.0, 0.5, 0.99, 0.999_999] {
            for k in 0..=100 {
                let m = TAU * k as f64 / 100.0 * 0.999_999;
                let ecc = solve_kepler(m, e);
                assert!((ecc - e * ecc.sin() - m).abs() <= 1e-12, "e={e} m={m}");
            }
        }
    }

    fn reversed(s: &PhaseState) -> PhaseState {
        PhaseState::new(s.position, [-s.velocity[0], -s.velocity[1]], s.time)
    }

    type Stepper<'a> = &'a dyn Fn(&PhaseState) -> Result<PhaseState>;

    #[test]
    fn leapfrog_is_time_reversible() {
        let cases: [(PhaseState, Stepper); 2] = [
            (PhaseState::new([0.7, -0.2], [0.3, 0.9], 0.0), &|s| leapfrog_step(s, 0.01, &Harmonic { omega: 1.0 })),
            (kepler_init(0.5).unwrap(), &|s| leapfrog_step(s, 0.01, &Kepler)),
        ];
        for (s0, step) in cases {
            let fwd = step(&s0).unwrap();
            let back = reversed(&step(&reversed(&fwd)).unwrap());
            for (a, b) in back.components().iter().zip(s0.components()) {
                assert!((a - b).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn energy_has_no_secular_drift() {
        let orbit = KeplerOrbit::new(0.5).unwrap();
        let period = orbit.period();
        let steps = 2000;
        let dt = period / steps as f64;
        let mut s = orbit.initial_state();
        let e0 = specific_energy(&s).unwrap();
        let mut means = Vec::new();
        for _ in 0..10 {
            let mut sum = 0.0;
            for _ in 0..steps {
                s = leapfrog_step(&s, dt, &Kepler).unwrap();
                let e = specific_energy(&s).unwrap();
                assert!((e - e0).abs() <= 1e-4);
                sum += e;
            }
            means.push(sum / steps as f64);
        }
        let drift = means.last().unwrap() - means[0];
        assert!(drift.abs() <= 1e-6, "drift {drift}");
    }

    #[test]
    fn fixed_integration_is_second_order_globally() {
        let orbit = KeplerOrbit::new(0.3).unwrap();
        let s = orbit.initial_state();
        let t = 0.5 * orbit.period();
        let exact = orbit.state_at(t);
        let err = |n: usize| {
            let r = integrate_fixed(&Kepler, &s, t, n).unwrap();
            norm([r.position[0] - exact.position[0], r.position[1] - exact.position[1]])
        };
        let slope = (err(400) / err(800)).log2();
        assert!((slope - 2.0).abs() <= 0.3, "slope {slope}");
    }
}
