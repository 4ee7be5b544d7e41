//! Shooting solver for the even ground state of
//! `-phi'' + x^2 phi + 2 g phi^3 = mu phi` on the half line.

#[derive(Debug, Clone, Copy)]
pub struct GpGroundState {
    pub energy: f64,
    pub mu: f64,
    pub kinetic: f64,
    pub trap: f64,
    pub interaction: f64,
    pub amplitude: f64,
}

const STEP: f64 = 5e-4;
const X_MAX: f64 = 14.0;

enum Fate {
    CrossedZero,
    TurnedUp,
    Survived,
}

fn rhs(x: f64, y: [f64; 2], g: f64, mu: f64) -> [f64; 2] {
    [y[1], (x * x + 2.0 * g * y[0] * y[0] - mu) * y[0]]
}

fn rk4(x: f64, y: [f64; 2], g: f64, mu: f64) -> [f64; 2] {
    let h = STEP;
    let k1 = rhs(x, y, g, mu);
    let y2 = [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]];
    let k2 = rhs(x + 0.5 * h, y2, g, mu);
    let y3 = [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]];
    let k3 = rhs(x + 0.5 * h, y3, g, mu);
    let y4 = [y[0] + h * k3[0], y[1] + h * k3[1]];
    let k4 = rhs(x + h, y4, g, mu);
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Integrates outward and stores the trajectory until it either crosses
/// zero or turns upward.
fn shoot(a: f64, g: f64, mu: f64, keep: bool) -> (Fate, Vec<[f64; 2]>) {
    let mut y = [a, 0.0];
    let mut x = 0.0;
    let mut path = Vec::new();
    if keep {
        path.push(y);
    }
    while x < X_MAX {
        y = rk4(x, y, g, mu);
        x += STEP;
        if y[0] <= 0.0 {
            return (Fate::CrossedZero, path);
        }
        if y[1] > 0.0 {
            return (Fate::TurnedUp, path);
        }
        if keep {
            path.push(y);
        }
    }
    (Fate::Survived, path)
}

fn eigenvalue_for_amplitude(a: f64, g: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0 + 4.0 * g * a * a + 2.0);
    // Make sure the bracket is valid before bisecting.
    while matches!(shoot(a, g, hi, false).0, Fate::TurnedUp) {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        match shoot(a, g, mid, false).0 {
            Fate::CrossedZero => hi = mid,
            _ => lo = mid,
        }
    }
    0.5 * (lo + hi)
}

/// Simpson quadrature over a uniformly spaced path, falling back to the
/// trapezoid rule on the last panel when the count is even.
fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 3 {
        return values.iter().sum::<f64>() * h;
    }
    let panels = if (n - 1) % 2 == 0 { n - 1 } else { n - 2 };
    let mut s = values[0] + values[panels];
    for (i, v) in values.iter().enumerate().take(panels).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    let mut total = s * h / 3.0;
    if panels < n - 1 {
        total += 0.5 * h * (values[n - 2] + values[n - 1]);
    }
    total
}

struct Profile {
    mu: f64,
    path: Vec<[f64; 2]>,
}

fn profile(a: f64, g: f64) -> Profile {
    let mu = eigenvalue_for_amplitude(a, g);
    let (_, path) = shoot(a, g, mu, true);
    Profile { mu, path }
}

fn norm(p: &Profile) -> f64 {
    let sq: Vec<f64> = p.path.iter().map(|y| y[0] * y[0]).collect();
    2.0 * simpson(&sq, STEP)
}

/// Ground state of the 1D harmonic GP problem with `V = x^2` and coupling
/// `g` in the energy `int |phi'|^2 + x^2 phi^2 + g phi^4`.
pub fn harmonic_gp_ground_state(g: f64) -> GpGroundState {
    // The amplitude is fixed by normalization; bisect on it.
    let mut lo = 1e-3;
    let mut hi = std::f64::consts::PI.powf(-0.25) * 1.01;
    while norm(&profile(hi, g)) < 1.0 {
        hi *= 1.5;
    }
    while norm(&profile(lo, g)) > 1.0 {
        lo *= 0.5;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if norm(&profile(mid, g)) > 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    let p = profile(a, g);
    let scale = 1.0 / norm(&p).sqrt();
    let xs = |i: usize| i as f64 * STEP;
    let kin: Vec<f64> = p.path.iter().map(|y| (scale * y[1]).powi(2)).collect();
    let trap: Vec<f64> = p
        .path
        .iter()
        .enumerate()
        .map(|(i, y)| xs(i).powi(2) * (scale * y[0]).powi(2))
        .collect();
    let quartic: Vec<f64> = p.path.iter().map(|y| (scale * y[0]).powi(4)).collect();
    let kinetic = 2.0 * simpson(&kin, STEP);
    let trap = 2.0 * simpson(&trap, STEP);
    let interaction = g * 2.0 * simpson(&quartic, STEP);
    GpGroundState {
        energy: kinetic + trap + interaction,
        mu: p.mu,
        kinetic,
        trap,
        interaction,
        amplitude: a * scale,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_oscillator_is_recovered() {
        let s = harmonic_gp_ground_state(0.0);
        assert!((s.energy - 1.0).abs() < 1e-9, "{s:?}");
        assert!((s.mu - 1.0).abs() < 1e-9);
        assert!((s.kinetic - 0.5).abs() < 1e-8);
    }

    #[test]
    fn chemical_potential_relation_holds() {
        let s = harmonic_gp_ground_state(5.0);
        assert!((s.mu - (s.energy + s.interaction)).abs() < 1e-7, "{s:?}");
    }
}
