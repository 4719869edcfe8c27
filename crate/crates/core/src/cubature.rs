//! Collapsed-coordinate Gauss cubature of arbitrary degree.
//!
//! These rules are not symmetric and have many more nodes than the searched
//! rules, but they are exact by construction and cheap to build, which makes
//! them the reference integrator for error norms and boundary integrals.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::gauss::lg_points;
use crate::geometry::Domain;
use crate::scalar::Real;

/// Nodes (`n × d`) and weights of a rule exact for polynomials of total
/// degree `degree` on the reference element.
pub fn collapsed_rule<T: Real>(domain: Domain, degree: usize) -> Result<(DMatrix<T>, Vec<T>)> {
    let n = degree / 2 + 2;
    let (g, gw) = lg_points::<T>(n)?;
    let half = T::lit(0.5);
    let one = T::one();
    let mut pts: Vec<T> = Vec::new();
    let mut ws = Vec::new();
    match domain {
        Domain::Interval => {
            pts.extend_from_slice(&g);
            ws.extend_from_slice(&gw);
        }
        Domain::Triangle => {
            for (&a, &wa) in g.iter().zip(&gw) {
                for (&s, &wb) in g.iter().zip(&gw) {
                    let r = half * (one + a) * (one - s) - one;
                    pts.push(r);
                    pts.push(s);
                    ws.push(wa * wb * half * (one - s));
                }
            }
        }
        Domain::Tetrahedron => {
            for (&a, &wa) in g.iter().zip(&gw) {
                for (&b, &wb) in g.iter().zip(&gw) {
                    for (&w, &wc) in g.iter().zip(&gw) {
                        let s = half * (one + b) * (one - w) - one;
                        let r = half * (one + a) * (-s - w) - one;
                        pts.extend_from_slice(&[r, s, w]);
                        ws.push(wa * wb * wc * half * (one - w) * half * (-s - w));
                    }
                }
            }
        }
    }
    let d = domain.dim();
    Ok((DMatrix::from_row_slice(ws.len(), d, &pts), ws))
}
