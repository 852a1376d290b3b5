use super::config::{IiBackend, LossConfig};
use crate::error::{bail, Result};
use crate::infotheory::{interaction_info_gaussian_graph, IiProjections};
use crate::numerics::{matmul, Graph, Tensor, Var};

/// Graph handles for one decoder's loss.
#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    pub total: Var,
    /// Unweighted Gaussian interaction information (nats), absent when the backend is off.
    pub ii: Option<Var>,
    /// Mean over the batch of `‖y − x1‖²`.
    pub recon: Var,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossTerms {
    pub total: f64,
    pub ii: Option<f64>,
    pub recon: f64,
}

/// `ii_weight · II(x1, x2, y) + recon_weight · mean_b ‖y_b − x1_b‖²`.
///
/// `x1` (`B × D`) is the decoder's own-modality target, `x2` (`B × D₂`) the other
/// modality, and `y` (`B × D`) the decoder output on the graph.
pub fn loss_graph(g: &mut Graph, x1: &Tensor, x2: &Tensor, y: Var, proj: &IiProjections, cfg: &LossConfig) -> Result<LossVars> {
    let (b, d) = x1.dims2()?;
    if g.value(y).shape() != [b, d] || x2.dims2()?.0 != b {
        bail!(
            Dimension,
            "loss: targets {:?}, other modality {:?} and outputs {:?} disagree",
            x1.shape(),
            x2.shape(),
            g.value(y).shape()
        );
    }
    let target = g.constant(x1.clone());
    let diff = g.sub(y, target)?;
    let sq = g.mul(diff, diff)?;
    let sum = g.sum(sq)?;
    let recon = g.scale(sum, 1.0 / b as f64)?;
    let weighted_recon = g.scale(recon, cfg.recon_weight)?;
    match cfg.ii_backend {
        IiBackend::Off => Ok(LossVars {
            total: weighted_recon,
            ii: None,
            recon,
        }),
        IiBackend::Gaussian => {
            let x1p = matmul(x1, proj.x1())?;
            let x2p = matmul(x2, proj.x2())?;
            let ii = interaction_info_gaussian_graph(g, &x1p, &x2p, y, proj, cfg.ridge)?;
            let weighted_ii = g.scale(ii, cfg.ii_weight)?;
            Ok(LossVars {
                total: g.add(weighted_ii, weighted_recon)?,
                ii: Some(ii),
                recon,
            })
        }
    }
}

/// Value of [`loss_graph`] on row-major batches.
pub fn loss(x1: &[Vec<f64>], x2: &[Vec<f64>], y: &[Vec<f64>], proj: &IiProjections, cfg: &LossConfig) -> Result<LossTerms> {
    let rows = |r: &[Vec<f64>]| -> Result<Tensor> {
        if r.is_empty() {
            bail!(Dimension, "loss needs a nonempty batch");
        }
        Tensor::matrix(r.len(), r[0].len(), r.concat())
    };
    let mut g = Graph::new();
    let yv = g.constant(rows(y)?);
    let vars = loss_graph(&mut g, &rows(x1)?, &rows(x2)?, yv, proj, cfg)?;
    Ok(LossTerms {
        total: g.scalar(vars.total),
        ii: vars.ii.map(|v| g.scalar(v)),
        recon: g.scalar(vars.recon),
    })
}
