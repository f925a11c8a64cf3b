//! Gamma-family special functions on the positive reals.

use crate::error::{Error, Result};

// Godfrey's coefficients for the Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];
const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// `ψ(1) = −γ`.
pub const DIGAMMA_ONE: f64 = -0.577_215_664_901_532_9;

fn check_domain(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} requires a positive finite argument, got {x}")))
    }
}

/// Natural log of the gamma function.
pub fn log_gamma(x: f64) -> Result<f64> {
    check_domain("log_gamma", x)?;
    Ok(ln_gamma_unchecked(x))
}

pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // Γ(x) = Γ(x + 1) / x keeps the series in its accurate range.
        return lanczos_ln_gamma(x + 1.0) - x.ln();
    }
    lanczos_ln_gamma(x)
}

fn lanczos_ln_gamma(x: f64) -> f64 {
    let z = x - 1.0;
    let mut a = LANCZOS[0];
    for (i, &p) in LANCZOS.iter().enumerate().skip(1) {
        a += p / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    HALF_LN_TWO_PI + (z + 0.5) * t.ln() - t + a.ln()
}

/// Derivative of [`log_gamma`].
pub fn digamma(x: f64) -> Result<f64> {
    check_domain("digamma", x)?;
    Ok(digamma_unchecked(x))
}

pub(crate) fn digamma_unchecked(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // ln x − 1/(2x) − Σ B_2k / (2k x^2k)
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0))))));
    acc + x.ln() - 0.5 * inv - series
}

/// Second derivative of [`log_gamma`].
pub fn trigamma(x: f64) -> Result<f64> {
    check_domain("trigamma", x)?;
    Ok(trigamma_unchecked(x))
}

pub(crate) fn trigamma_unchecked(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        + inv2 / 2.0
        + inv * inv2
            * (1.0 / 6.0
                - inv2
                    * (1.0 / 30.0
                        - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0)))));
    acc + series
}

/// Solve `ψ(x) = y` for `x > 0` by Newton's method.
pub fn inverse_digamma(y: f64) -> f64 {
    // Initial guess from the asymptotic behaviour at both ends.
    let mut x = if y >= -2.22 {
        y.exp() + 0.5
    } else {
        -1.0 / (y - DIGAMMA_ONE)
    };
    for _ in 0..50 {
        let step = (digamma_unchecked(x) - y) / trigamma_unchecked(x);
        let mut next = x - step;
        if next <= 0.0 {
            next = x / 2.0;
        }
        let done = (next - x).abs() <= 1e-14 * x.max(1e-300);
        x = next;
        if done {
            break;
        }
    }
    x
}

#[cfg(test)]
#[allow(clippy::excessive_precision, clippy::approx_constant)]
mod tests {
    use super::*;

    // (x, ln Γ(x), ψ(x), ψ'(x)) evaluated with 40-digit arithmetic.
    const REFERENCE: [(f64, f64, f64, f64); 13] = [
        (1e-6, 13.81550998074943166920783, -1000000.577214019968668068, 1000000000001.644931662738),
        (0.001, 6.907178885383853682512345, -1000.575571931810300471473, 1000001.642533195868978033),
        (0.1, 2.252712651734205959869702, -10.42375494041107679516822, 101.4332991507927588172155),
        (0.5, 0.5723649429247000870717137, -1.963510026021423479440976, 4.934802200544679309417245),
        (1.5, -0.1207822376352452223455184, 0.03648997397857652055902367, 0.9348022005446793094172455),
        (3.0, 0.6931471805599453094172321, 0.9227843350984671393934879, 0.3949340668482264364724152),
        (7.25, 7.052185450738539444925749, 1.910453526883736028382495, 0.1478792331589321696521371),
        (10.0, 12.80182748008146961120772, 2.251752589066721107647456, 0.105166335681685746122201),
        (33.3, 82.60372358165495292832303, 3.490467238520242863925262, 0.03048544409533888514884092),
        (100.0, 359.134205369575398776044, 4.600161852738087400198606, 0.01005016666333357139524567),
        (1234.5, 7550.550901077894895729836, 7.118016231827997843305218, 0.000810372727126966652695133),
        (1e5, 1051287.708973656894900858, 11.51292046496189508675671, 0.00001000005000016666666666333),
        (1e6, 12815504.56914761165997697, 13.81551005796419077077462, 0.000001000000500000166666666667),
    ];

    #[test]
    fn log_gamma_known_values() {
        assert!(log_gamma(1.0).unwrap().abs() < 1e-15);
        assert!(log_gamma(2.0).unwrap().abs() < 1e-15);
        let half = 0.5 * std::f64::consts::PI.ln();
        assert!((log_gamma(0.5).unwrap() - half).abs() < 1e-14);
        assert!((half - 0.5723649429).abs() < 1e-10);
    }

    #[test]
    fn log_gamma_relative_error() {
        for &(x, want, _, _) in &REFERENCE {
            let got = log_gamma(x).unwrap();
            let rel = ((got - want) / want).abs();
            assert!(rel <= 1e-12, "x={x}: got {got}, want {want}, rel {rel:e}");
        }
    }

    #[test]
    fn digamma_reference_values() {
        assert!((digamma(1.0).unwrap() - (-0.5772156649)).abs() < 1e-10);
        for &(x, _, want, _) in &REFERENCE {
            let got = digamma(x).unwrap();
            // absolute bound, scaled for the 1/x pole near zero
            let tol = 1e-10 * want.abs().max(1.0);
            assert!((got - want).abs() <= tol, "x={x}: got {got}, want {want}");
        }
    }

    #[test]
    fn trigamma_reference_values() {
        for &(x, _, _, want) in &REFERENCE {
            let got = trigamma(x).unwrap();
            assert!(((got - want) / want).abs() <= 1e-10, "x={x}: got {got}, want {want}");
        }
    }

    #[test]
    fn digamma_recurrence() {
        let mut x = 0.013;
        while x < 200.0 {
            let lhs = digamma(x + 1.0).unwrap() - digamma(x).unwrap();
            assert!((lhs - 1.0 / x).abs() <= 1e-10 * (1.0 / x).max(1.0), "x={x}");
            x *= 1.37;
        }
    }

    #[test]
    fn digamma_matches_finite_difference() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let x: f64 = rng.random_range(0.1..100.0);
            let h = 1e-5;
            let fd = (log_gamma(x + h).unwrap() - log_gamma(x - h).unwrap()) / (2.0 * h);
            assert!((fd - digamma(x).unwrap()).abs() < 1e-6, "x={x}");
        }
    }

    #[test]
    fn inverse_digamma_round_trips() {
        for &x in &[1e-4, 0.01, 0.3, 1.0, 2.5, 17.0, 400.0, 1e5] {
            let y = digamma(x).unwrap();
            let back = inverse_digamma(y);
            assert!(((back - x) / x).abs() < 1e-10, "x={x}, back={back}");
        }
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(log_gamma(0.0), Err(Error::Domain(_))));
        assert!(matches!(log_gamma(-1.0), Err(Error::Domain(_))));
        assert!(matches!(digamma(0.0), Err(Error::Domain(_))));
        assert!(matches!(digamma(f64::NAN), Err(Error::Domain(_))));
    }
}
