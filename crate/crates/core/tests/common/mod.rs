//! Test-only oracles shared by the integration suites.

#![allow(dead_code)]

use std::ops::{Add, Div, Mul, Neg, Sub};

use motorfault::Network;

/// Double-double number: `hi + lo` with `|lo| <= ulp(hi) / 2`, about 106
/// bits of significand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    const LN2: Dd = Dd {
        hi: std::f64::consts::LN_2,
        lo: 2.319_046_813_846_299_6e-17,
    };

    pub fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    /// Exact only for powers of two.
    fn scale(self, k: f64) -> Dd {
        Dd {
            hi: self.hi * k,
            lo: self.lo * k,
        }
    }

    pub fn exp(self) -> Dd {
        let k = (self.hi / std::f64::consts::LN_2).round();
        let r = (self - Dd::LN2 * Dd::from(k)).scale(1.0 / 1024.0);
        // expm1(r) by Taylor series; |r| < 4e-4 so 12 terms is plenty
        let mut term = r;
        let mut sum = r;
        for n in 2..=12 {
            term = term * r / Dd::from(n as f64);
            sum = sum + term;
        }
        for _ in 0..10 {
            sum = sum.scale(2.0) + sum * sum;
        }
        (sum + Dd::ONE).scale(2f64.powi(k as i32))
    }

    pub fn sigmoid(self) -> Dd {
        Dd::ONE / (Dd::ONE + (-self).exp())
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let p = self.hi * b.hi;
        let e = self.hi.mul_add(b.hi, -p) + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * Dd::from(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Dd::from(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from(q3)
    }
}

/// Mean squared error of a sigmoid network, evaluated in double-double.
/// `perturb` is added to the parameter at `(layer, index)`, where indices
/// past the weights address the biases.
pub fn dd_loss(net: &Network, input: &[f64], target: &[f64], at: (usize, usize), perturb: Dd) -> Dd {
    let mut act: Vec<Dd> = input.iter().map(|&x| Dd::from(x)).collect();
    for (l, layer) in net.layers().iter().enumerate() {
        let (n_in, n_out) = (layer.in_dim(), layer.out_dim());
        let param = |idx: usize, value: f64| {
            if (l, idx) == at {
                Dd::from(value) + perturb
            } else {
                Dd::from(value)
            }
        };
        act = (0..n_out)
            .map(|o| {
                let mut z = param(layer.weights().len() + o, layer.biases()[o]);
                for i in 0..n_in {
                    z = z + param(o * n_in + i, layer.weights()[o * n_in + i]) * act[i];
                }
                z.sigmoid()
            })
            .collect();
    }
    let mut sum = Dd::ZERO;
    for (o, &t) in act.iter().zip(target) {
        let d = *o - Dd::from(t);
        sum = sum + d * d;
    }
    sum / Dd::from(target.len() as f64)
}

/// Central difference of [`dd_loss`] with step `h`, for every parameter:
/// per layer, weights (row-major) then biases.
pub fn dd_numeric_gradient(net: &Network, input: &[f64], target: &[f64], h: f64) -> Vec<Vec<f64>> {
    net.layers()
        .iter()
        .enumerate()
        .map(|(l, layer)| {
            (0..layer.weights().len() + layer.biases().len())
                .map(|k| {
                    let plus = dd_loss(net, input, target, (l, k), Dd::from(h));
                    let minus = dd_loss(net, input, target, (l, k), Dd::from(-h));
                    ((plus - minus) / Dd::from(2.0 * h)).to_f64()
                })
                .collect()
        })
        .collect()
}

/// `|a - b| / (max(|a|, |b|) + 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs().max(b.abs()) + 1e-8)
}
