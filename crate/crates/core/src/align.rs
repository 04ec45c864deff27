//! Orthogonal Procrustes alignment of shared latent positions across draws,
//! and their two-dimensional PCA projection.

use nalgebra::DMatrix;

use crate::archive::PosteriorArchive;
use crate::error::{Error, Result};
use crate::model::Latents;

/// Node positions `Z(t)`, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPositionFrame {
    pub t: usize,
    pub z: DMatrix<f64>,
}

impl LatentPositionFrame {
    /// Rows `ζ_j(t_i)ᵀ` of one draw.
    pub fn from_latents(lat: &Latents, t: usize) -> Result<Self> {
        let d = &lat.dims;
        if t >= d.times {
            return Err(Error::IndexOutOfRange(format!("time index {t} with {} times", d.times)));
        }
        let z = DMatrix::from_fn(d.nodes, d.shared_rank, |j, r| lat.zeta[d.zeta_index(j, r) + t]);
        Ok(LatentPositionFrame { t, z })
    }

    /// Pairwise inner products `Z Zᵀ`.
    pub fn gram(&self) -> DMatrix<f64> {
        &self.z * self.z.transpose()
    }
}

/// `O = U Vᵀ` from the SVD `ZᵀZ₀ = U Σ Vᵀ`, minimizing `‖Z O − Z₀‖_F` over all
/// orthogonal matrices (reflections included).
pub fn procrustes_rotation(z: &DMatrix<f64>, z0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if z.shape() != z0.shape() {
        return Err(Error::ShapeMismatch(format!(
            "frames are {:?} and {:?}",
            z.shape(),
            z0.shape()
        )));
    }
    let m = z.transpose() * z0;
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.expect("requested U"), svd.v_t.expect("requested Vᵀ"));
    Ok(u * v_t)
}

pub fn procrustes_rotate(z: &LatentPositionFrame, z0: &LatentPositionFrame) -> Result<LatentPositionFrame> {
    let o = procrustes_rotation(&z.z, &z0.z)?;
    Ok(LatentPositionFrame {
        t: z.t,
        z: &z.z * o,
    })
}

/// Mean of all draws' frames at `t` after rotating each onto the first draw.
pub fn posterior_mean_positions(archive: &PosteriorArchive, t: usize) -> Result<LatentPositionFrame> {
    let first = archive
        .draws
        .first()
        .ok_or_else(|| Error::InvalidInput("archive has no draws".into()))?;
    let reference = LatentPositionFrame::from_latents(first, t)?;
    let mut sum = DMatrix::zeros(reference.z.nrows(), reference.z.ncols());
    for d in &archive.draws {
        let f = LatentPositionFrame::from_latents(d, t)?;
        sum += procrustes_rotate(&f, &reference)?.z;
    }
    Ok(LatentPositionFrame {
        t,
        z: sum / archive.len() as f64,
    })
}

/// Two-dimensional PCA of a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// `J × 2` scores on the first two components.
    pub coords: DMatrix<f64>,
    /// Singular values of the centered frame, descending.
    pub singular_values: Vec<f64>,
    /// Loading vectors of the two components, as columns.
    pub loadings: DMatrix<f64>,
    /// Second singular value below 1e-10.
    pub rank_deficient: bool,
}

/// Projects the column-centered frame onto its top two right singular
/// vectors, each oriented so that its largest-magnitude entry is positive.
pub fn pca_project(frame: &LatentPositionFrame) -> Result<Projection> {
    let r = frame.z.ncols();
    if r < 2 {
        return Err(Error::InvalidInput(format!("PCA projection needs at least 2 columns, got {r}")));
    }
    let mut x = frame.z.clone();
    for mut col in x.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    let svd = x.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested Vᵀ");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut loadings = DMatrix::zeros(r, 2);
    for c in 0..2 {
        let Some(&row) = order.get(c) else { continue };
        let mut v: Vec<f64> = v_t.row(row).iter().copied().collect();
        let lead = v.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if lead < 0.0 {
            v.iter_mut().for_each(|e| *e = -*e);
        }
        for (i, e) in v.into_iter().enumerate() {
            loadings[(i, c)] = e;
        }
    }
    let coords = &x * &loadings;
    let rank_deficient = singular_values.get(1).is_none_or(|s| *s < 1e-10);
    Ok(Projection {
        coords,
        singular_values,
        loadings,
        rank_deficient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_alignment() {
        let z = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -0.3, 2.0, 0.7, -1.1]);
        let o = procrustes_rotation(&z, &z).unwrap();
        assert!((o - DMatrix::identity(2, 2)).abs().max() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        let a = DMatrix::zeros(3, 2);
        let b = DMatrix::zeros(2, 2);
        assert!(matches!(procrustes_rotation(&a, &b), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn one_column_rejected() {
        let f = LatentPositionFrame {
            t: 0,
            z: DMatrix::zeros(4, 1),
        };
        assert!(pca_project(&f).is_err());
    }
}
