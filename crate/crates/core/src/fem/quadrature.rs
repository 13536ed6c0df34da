//! Symmetric triangle rules in barycentric coordinates and Gauss-Legendre on edges.

/// Barycentric point `(L1, L2, L3)` and weight summing to 1 over the rule.
pub type TriPoint = ([f64; 3], f64);

pub fn centroid_rule() -> Vec<TriPoint> {
    vec![([1.0 / 3.0; 3], 1.0)]
}

fn orbit3(a: f64, w: f64, out: &mut Vec<TriPoint>) {
    let b = 1.0 - 2.0 * a;
    out.push(([b, a, a], w));
    out.push(([a, b, a], w));
    out.push(([a, a, b], w));
}

/// Exact for degree 2.
pub fn degree2() -> Vec<TriPoint> {
    let mut v = Vec::with_capacity(3);
    orbit3(1.0 / 6.0, 1.0 / 3.0, &mut v);
    v
}

/// Exact for degree 4.
pub fn degree4() -> Vec<TriPoint> {
    let mut v = Vec::with_capacity(6);
    orbit3(0.445948490915965, 0.223381589678011, &mut v);
    orbit3(0.091576213509771, 0.109951743655322, &mut v);
    v
}

/// Exact for degree 5.
pub fn degree5() -> Vec<TriPoint> {
    let mut v = Vec::with_capacity(7);
    v.push(([1.0 / 3.0; 3], 0.225));
    orbit3(0.470142064105115, 0.132394152788506, &mut v);
    orbit3(0.101286507323456, 0.125939180544827, &mut v);
    v
}

/// Points in `[0, 1]` with weights summing to 1; exact for degree 5.
pub fn gauss3() -> [(f64, f64); 3] {
    let d = 0.5 * (0.6_f64).sqrt();
    [(0.5 - d, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + d, 5.0 / 18.0)]
}

#[cfg(test)]
mod tests {
    use super::*;

    // ∫ over the reference triangle of L1^a L2^b L3^c = a! b! c! 2! / (a+b+c+2)! times area
    fn exact(a: u32, b: u32, c: u32) -> f64 {
        let f = |n: u32| (1..=n).map(|k| k as f64).product::<f64>();
        f(a) * f(b) * f(c) * 2.0 / f(a + b + c + 2)
    }

    fn check(rule: &[TriPoint], deg: u32) {
        for a in 0..=deg {
            for b in 0..=deg - a {
                let c = deg - a - b;
                let q: f64 = rule
                    .iter()
                    .map(|(l, w)| w * l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32))
                    .sum();
                assert!((q - exact(a, b, c)).abs() < 1e-12, "{a} {b} {c}");
            }
        }
    }

    #[test]
    fn rules_are_exact() {
        for d in 0..=2 {
            check(&degree2(), d);
        }
        for d in 0..=4 {
            check(&degree4(), d);
        }
        for d in 0..=5 {
            check(&degree5(), d);
        }
    }

    #[test]
    fn gauss_is_exact() {
        for p in 0..=5 {
            let q: f64 = gauss3().iter().map(|(x, w)| w * x.powi(p)).sum();
            assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14);
        }
    }
}
