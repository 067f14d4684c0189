//! Roots of monic cubics and quartics via closed forms, polished by Newton.

use num_complex::Complex64;

const NEWTON_STEPS: usize = 16;

fn horner(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    // coeffs are monic-first: z^n + coeffs[0] z^(n-1) + ... + coeffs[n-1]
    let mut p = Complex64::new(1.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Newton iterations on the monic polynomial; a step is kept only if it
/// reduces the residual.
fn polish(coeffs: &[f64], mut z: Complex64) -> Complex64 {
    let (mut p, mut dp) = horner(coeffs, z);
    for _ in 0..NEWTON_STEPS {
        if p.norm() == 0.0 || dp.norm() == 0.0 {
            break;
        }
        let next = z - p / dp;
        let (pn, dpn) = horner(coeffs, next);
        if !(pn.norm() < p.norm()) {
            break;
        }
        z = next;
        p = pn;
        dp = dpn;
    }
    z
}

/// Roots of `z^3 + a z^2 + b z + c`.
pub fn cubic_roots(a: f64, b: f64, c: f64) -> [Complex64; 3] {
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let half_q = Complex64::new(q / 2.0, 0.0);
    let disc = (half_q * half_q + Complex64::new(p * p * p / 27.0, 0.0)).sqrt();
    // pick the branch that avoids cancellation
    let w = if (-half_q + disc).norm() >= (-half_q - disc).norm() {
        -half_q + disc
    } else {
        -half_q - disc
    };
    let u = w.cbrt();
    let omega = Complex64::new(-0.5, 3.0_f64.sqrt() / 2.0);
    let mut out = [Complex64::new(0.0, 0.0); 3];
    let mut rot = Complex64::new(1.0, 0.0);
    for root in out.iter_mut() {
        let uk = u * rot;
        let t = if uk.norm() == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            uk - p / (3.0 * uk)
        };
        *root = polish(&[a, b, c], t - shift);
        rot *= omega;
    }
    out
}

fn quadratic_roots(b: Complex64, c: Complex64) -> [Complex64; 2] {
    // z^2 + b z + c
    let disc = (b * b - 4.0 * c).sqrt();
    let big = if (-b + disc).norm() >= (-b - disc).norm() {
        (-b + disc) / 2.0
    } else {
        (-b - disc) / 2.0
    };
    if big.norm() == 0.0 {
        return [big, big];
    }
    [big, c / big]
}

/// Roots of `z^4 + c1 z^3 + c2 z^2 + c3 z + c4`, ordered by decreasing real part.
pub fn quartic_roots(c1: f64, c2: f64, c3: f64, c4: f64) -> [Complex64; 4] {
    let shift = c1 / 4.0;
    let p = c2 - 3.0 * c1 * c1 / 8.0;
    let q = c3 - c1 * c2 / 2.0 + c1 * c1 * c1 / 8.0;
    let r = c4 - c1 * c3 / 4.0 + c1 * c1 * c2 / 16.0 - 3.0 * c1.powi(4) / 256.0;

    // magnitude of a typical root of the depressed quartic
    let scale = [p.abs().sqrt(), q.abs().cbrt(), r.abs().sqrt().sqrt()]
        .into_iter()
        .fold(0.0_f64, f64::max);
    let ys = if q.abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE).powi(3) {
        // biquadratic y^4 + p y^2 + r
        let zs = quadratic_roots(Complex64::new(p, 0.0), Complex64::new(r, 0.0));
        [zs[0].sqrt(), -zs[0].sqrt(), zs[1].sqrt(), -zs[1].sqrt()]
    } else {
        // resolvent: m^3 + p m^2 + (p^2/4 - r) m - q^2/8 = 0
        let ms = cubic_roots(p, p * p / 4.0 - r, -q * q / 8.0);
        let m = ms
            .into_iter()
            .max_by(|x, y| x.norm().total_cmp(&y.norm()))
            .expect("three roots");
        let s = (2.0 * m).sqrt();
        let base = p / 2.0 + m;
        let corr = q / (2.0 * s);
        let first = quadratic_roots(-s, base + corr);
        let second = quadratic_roots(s, base - corr);
        [first[0], first[1], second[0], second[1]]
    };
    let coeffs = [c1, c2, c3, c4];
    let mut roots = ys.map(|y| polish(&coeffs, y - shift));
    roots.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    roots
}
