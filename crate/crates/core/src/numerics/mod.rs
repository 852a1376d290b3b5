//! Dense tensors, the seeded generator, and the small reverse-mode engine the decoders
//! and the loss are built on.

pub mod gradcheck;
pub mod graph;
pub mod linalg;
pub(crate) mod par;
pub mod rng;
pub mod sum;
pub mod tensor;

pub use gradcheck::{grad_check, grad_check_coords, GradCheckReport};
pub use graph::{ConvGeometry, Gradients, Graph, Var};
pub use rng::{gaussian_matrix, Rng};
pub use sum::exact_sum;
pub use tensor::{matmul, matvec, transpose, Tensor};

#[cfg(test)]
mod primitive_grad_tests {
    //! Every differentiable primitive against central differences on inputs in [-1, 1].
    use super::*;
    use crate::error::Result;

    fn random(shape: &[usize], rng: &mut Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| 2.0 * rng.uniform() - 1.0).collect()).unwrap()
    }

    fn check<F: Fn(&mut Graph, Var) -> Result<Var>>(f: F, point: &Tensor) {
        let r = grad_check(f, point, 1e-5).unwrap();
        assert!(r.checked > 0);
        assert!(r.max_rel_error < 1e-6, "{r:?}");
    }

    #[test]
    fn matmul_transpose_scale() {
        let mut rng = Rng::new(1);
        let other = random(&[3, 2], &mut rng);
        let p = random(&[4, 3], &mut rng);
        check(
            |g, x| {
                let o = g.constant(other.clone());
                let m = g.matmul(x, o)?;
                let t = g.transpose(m)?;
                let q = g.mul(t, t)?;
                let s = g.scale(q, -0.7)?;
                g.sum(s)
            },
            &p,
        );
    }

    #[test]
    fn conv_transpose_all_inputs() {
        let mut rng = Rng::new(2);
        let geo = ConvGeometry { stride: 2, padding: 1, output_padding: 1 };
        let (xs, ws, bs) = ([2, 2, 2, 2], [2, 3, 3, 3], [3]);
        let x0 = random(&xs, &mut rng);
        let w0 = random(&ws, &mut rng);
        let b0 = random(&bs, &mut rng);
        let target = random(&[2, 3, 4, 4], &mut rng);
        let n_x = x0.len();
        let n_w = w0.len();
        let flat: Vec<f64> = [x0.data(), w0.data(), b0.data()].concat();
        let p = Tensor::vector(flat).unwrap();
        check(
            |g, theta| {
                let x = g.slice(theta, 0, n_x)?;
                let x = g.reshape(x, xs.to_vec())?;
                let w = g.slice(theta, n_x, n_w)?;
                let w = g.reshape(w, ws.to_vec())?;
                let b = g.slice(theta, n_x + n_w, 3)?;
                let y = g.conv_transpose2d(x, w, b, geo)?;
                let t = g.constant(target.clone());
                let q = g.mul(y, t)?;
                let q = g.mul(q, y)?;
                g.sum(q)
            },
            &p,
        );
    }

    #[test]
    fn linear_and_concat() {
        let mut rng = Rng::new(3);
        let p = random(&[3 * 4 + 2 * 4 + 2], &mut rng);
        let extra = random(&[3, 2], &mut rng);
        check(
            |g, theta| {
                let x = g.slice(theta, 0, 12)?;
                let x = g.reshape(x, vec![3, 4])?;
                let w = g.slice(theta, 12, 8)?;
                let w = g.reshape(w, vec![2, 4])?;
                let b = g.slice(theta, 20, 2)?;
                let y = g.linear(x, w, b)?;
                let e = g.constant(extra.clone());
                let c = g.concat_cols(&[y, e, y])?;
                let c2 = g.mul(c, c)?;
                g.sum(c2)
            },
            &p,
        );
    }

    #[test]
    fn relu_add_sub() {
        let mut rng = Rng::new(4);
        let p = random(&[12], &mut rng);
        let other = random(&[12], &mut rng);
        // keep the probes away from the kink at zero
        let p = Tensor::vector(
            p.data()
                .iter()
                .map(|&v| if v.abs() < 0.05 { v + 0.1 } else { v })
                .collect(),
        )
        .unwrap();
        check(
            |g, x| {
                let r = g.relu(x)?;
                let o = g.constant(other.clone());
                let a = g.add(r, o)?;
                let d = g.sub(a, x)?;
                let q = g.mul(d, d)?;
                g.sum(q)
            },
            &p,
        );
    }

    #[test]
    fn log_det_of_submatrices() {
        let mut rng = Rng::new(5);
        let p = random(&[6, 3], &mut rng);
        check(
            |g, x| {
                let xt = g.transpose(x)?;
                let c = g.matmul(xt, x)?;
                let ridge = g.constant(Tensor::identity(3)?);
                let c = g.add(c, ridge)?;
                let whole = g.log_det(c)?;
                let sub = g.submatrix(c, &[0, 2])?;
                let part = g.log_det(sub)?;
                let d = g.sub(whole, part)?;
                g.scale(d, 0.5)
            },
            &p,
        );
    }
}
