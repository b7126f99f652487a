//! Polynomials with complex coefficients, stored in ascending order.
//!
//! In JSON a coefficient is either a real number or a `[re, im]` pair.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    coeffs: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Coef {
    Real(f64),
    Pair([f64; 2]),
}

impl Serialize for Poly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<Coef> = self
            .coeffs
            .iter()
            .map(|c| if c.im == 0.0 { Coef::Real(c.re) } else { Coef::Pair([c.re, c.im]) })
            .collect();
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Poly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<Coef>::deserialize(d)?;
        Ok(Poly::new(
            v.into_iter()
                .map(|c| match c {
                    Coef::Real(r) => Complex64::new(r, 0.0),
                    Coef::Pair([r, i]) => Complex64::new(r, i),
                })
                .collect(),
        ))
    }
}

impl Poly {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        let mut p = Poly { coeffs };
        p.trim();
        p
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Poly::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn constant(c: f64) -> Self {
        Poly::from_real(&[c])
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| *c == Complex64::new(0.0, 0.0)) {
            self.coeffs.pop();
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with the zero polynomial given degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    /// `sum |c_j|`, so that `|P(im)| <= l1 (1+|m|)^deg`.
    pub fn l1(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    pub fn scale(&self, a: Complex64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * a).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_and_degree() {
        let p = Poly::from_real(&[2.0, 0.0, 1.0, 0.0]);
        assert_eq!(p.degree(), 2);
        let i = Complex64::new(0.0, 1.0);
        assert_eq!(p.eval(i), Complex64::new(1.0, 0.0));
        assert!(p.eval(i * 2.0f64.sqrt()).re.abs() < 1e-15);
    }

    #[test]
    fn json_forms() {
        let p: Poly = serde_json::from_str("[1, [0, 2], 3.5]").unwrap();
        assert_eq!(p.coeffs()[1], Complex64::new(0.0, 2.0));
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[1.0,[0.0,2.0],3.5]");
    }
}
