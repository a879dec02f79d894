//! Orthonormal subspace bases: projectors, complements, intersections.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::operator::{Operator, C64};
use crate::spectral::{eigh_columns, orthonormality_deviation};
use crate::tol;

/// Ordered orthonormal family spanning a subspace of an `ambient_dim`
/// dimensional space. May be empty (D = 0).
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    ambient_dim: usize,
    vectors: Vec<Array1<C64>>,
}

impl SubspaceBasis {
    pub fn new(ambient_dim: usize, vectors: Vec<Array1<C64>>) -> Result<Self> {
        for v in &vectors {
            if v.len() != ambient_dim {
                return Err(Error::DimensionMismatch {
                    left: ambient_dim,
                    right: v.len(),
                });
            }
        }
        let basis = SubspaceBasis {
            ambient_dim,
            vectors,
        };
        let deviation = basis.orthonormality_deviation();
        if deviation > tol::ORTHO_TOL {
            return Err(Error::NotOrthonormal {
                deviation,
                tol: tol::ORTHO_TOL,
            });
        }
        Ok(basis)
    }

    pub fn empty(ambient_dim: usize) -> Self {
        SubspaceBasis {
            ambient_dim,
            vectors: Vec::new(),
        }
    }

    /// Coordinate subspace spanned by the given standard basis vectors.
    pub fn standard(ambient_dim: usize, indices: &[usize]) -> Self {
        let vectors = indices
            .iter()
            .map(|&i| {
                let mut v = Array1::zeros(ambient_dim);
                v[i] = C64::new(1.0, 0.0);
                v
            })
            .collect();
        SubspaceBasis {
            ambient_dim,
            vectors,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Number of vectors D.
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[Array1<C64>] {
        &self.vectors
    }

    pub fn vector(&self, j: usize) -> &Array1<C64> {
        &self.vectors[j]
    }

    pub fn orthonormality_deviation(&self) -> f64 {
        if self.vectors.is_empty() {
            return 0.0;
        }
        let mut m = Array2::zeros((self.ambient_dim, self.vectors.len()));
        for (j, v) in self.vectors.iter().enumerate() {
            m.column_mut(j).assign(v);
        }
        orthonormality_deviation(&m)
    }

    /// Sum of |v><v|.
    pub fn projector(&self) -> Operator {
        let n = self.ambient_dim;
        let mut entries = Array2::<C64>::zeros((n, n));
        for v in &self.vectors {
            for i in 0..n {
                for j in 0..n {
                    entries[(i, j)] += v[i] * v[j].conj();
                }
            }
        }
        Operator::new(entries).expect("square by construction")
    }

    /// Orthonormal basis of the orthogonal complement, in the
    /// deterministic order produced by the projector eigenproblem.
    pub fn orthogonal_complement(&self) -> Result<SubspaceBasis> {
        if self.vectors.is_empty() {
            let all: Vec<usize> = (0..self.ambient_dim).collect();
            return Ok(SubspaceBasis::standard(self.ambient_dim, &all));
        }
        let p = self.projector();
        let (values, vectors) = eigh_columns(p.entries())?;
        let mut out = Vec::new();
        for (k, &lam) in values.iter().enumerate() {
            if lam < 0.5 {
                out.push(vectors.column(k).to_owned());
            }
        }
        SubspaceBasis::new(self.ambient_dim, out)
    }

    /// Column matrix of the basis vectors (ambient_dim x D).
    pub fn column_matrix(&self) -> Array2<C64> {
        let mut m = Array2::zeros((self.ambient_dim, self.vectors.len()));
        for (j, v) in self.vectors.iter().enumerate() {
            m.column_mut(j).assign(v);
        }
        m
    }
}

/// Orthonormal basis of span(S1) intersected with span(S2).
///
/// Directions v common to both spans are exactly the null space of
/// M = 2*Id - P1 - P2 (each projector contributes 1 there); along
/// principal-angle pairs M has eigenvalues 1 -+ cos(theta), so keeping
/// eigenvectors with eigenvalue <= tol keeps directions with
/// cos(theta) >= 1 - tol. Returns D = 0 when the spans are disjoint.
pub fn subspace_intersection(
    s1: &SubspaceBasis,
    s2: &SubspaceBasis,
    tol: f64,
) -> Result<SubspaceBasis> {
    if s1.ambient_dim() != s2.ambient_dim() {
        return Err(Error::DimensionMismatch {
            left: s1.ambient_dim(),
            right: s2.ambient_dim(),
        });
    }
    let n = s1.ambient_dim();
    let m = Operator::identity(n)
        .scale_re(2.0)
        .sub(&s1.projector())?
        .sub(&s2.projector())?;
    let (values, vectors) = eigh_columns(m.entries())?;
    let mut kept = Vec::new();
    for (k, &lam) in values.iter().enumerate() {
        if lam <= tol {
            kept.push(vectors.column(k).to_owned());
        }
    }
    SubspaceBasis::new(n, kept)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn projector_distance(a: &SubspaceBasis, b: &SubspaceBasis) -> f64 {
        a.projector().sub(&b.projector()).unwrap().max_abs()
    }

    #[test]
    fn coordinate_intersection() {
        let s1 = SubspaceBasis::standard(3, &[0, 1]);
        let s2 = SubspaceBasis::standard(3, &[1, 2]);
        let i = subspace_intersection(&s1, &s2, 1e-10).unwrap();
        assert_eq!(i.dim(), 1);
        assert!(projector_distance(&i, &SubspaceBasis::standard(3, &[1])) <= 1e-10);
    }

    #[test]
    fn orthogonal_spans_are_disjoint() {
        let s1 = SubspaceBasis::standard(2, &[0]);
        let s2 = SubspaceBasis::standard(2, &[1]);
        let i = subspace_intersection(&s1, &s2, 1e-10).unwrap();
        assert_eq!(i.dim(), 0);
    }

    #[test]
    fn intersection_with_full_space_is_identity() {
        let full = SubspaceBasis::standard(3, &[0, 1, 2]);
        let s = SubspaceBasis::new(
            3,
            vec![Array1::from(vec![
                C64::new(0.6, 0.0),
                C64::new(0.0, 0.8),
                C64::new(0.0, 0.0),
            ])],
        )
        .unwrap();
        let i = subspace_intersection(&full, &s, 1e-10).unwrap();
        assert_eq!(i.dim(), 1);
        assert!(projector_distance(&i, &s) <= 1e-10);
    }

    #[test]
    fn self_intersection_reproduces_projector() {
        let s = SubspaceBasis::new(
            3,
            vec![
                Array1::from(vec![
                    C64::new(1.0 / 2.0f64.sqrt(), 0.0),
                    C64::new(0.0, 1.0 / 2.0f64.sqrt()),
                    C64::new(0.0, 0.0),
                ]),
                Array1::from(vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)]),
            ],
        )
        .unwrap();
        let i = subspace_intersection(&s, &s, 1e-10).unwrap();
        assert_eq!(i.dim(), 2);
        assert!(projector_distance(&i, &s) <= 1e-9);
    }

    #[test]
    fn complement_of_middle_coordinates() {
        let s = SubspaceBasis::standard(4, &[1, 2]);
        let c = s.orthogonal_complement().unwrap();
        assert_eq!(c.dim(), 2);
        assert!(projector_distance(&c, &SubspaceBasis::standard(4, &[0, 3])) <= 1e-10);
        // ascending projector eigenorder keeps coordinate order (|00>, |11>)
        assert!((c.vector(0)[0].norm() - 1.0).abs() <= 1e-12);
        assert!((c.vector(1)[3].norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn non_orthonormal_family_rejected() {
        let v = Array1::from(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        assert!(matches!(
            SubspaceBasis::new(2, vec![v]),
            Err(Error::NotOrthonormal { .. })
        ));
    }
}
