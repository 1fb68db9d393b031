use crate::error::Result;
use crate::matrix::{axpy, dot, Matrix};
use crate::model::Svq;
use crate::objective::Batch;
use crate::sampling::mix_rows;

/// Posterior mass below which a code is skipped by the pointwise residual.
pub const POSTERIOR_FLOOR: f64 = 1e-6;

/// For each code, ‖n E[x|y] − x'(y) − (n−1) E[x̂|y]‖ with the conditional
/// expectations taken over the batch under Pr(x|y) ∝ Pr(y|x). `None` marks
/// codes with no posterior mass on the batch.
pub fn stationarity_residual_recon(svq: &Svq, batch: &Batch) -> Result<Vec<Option<f64>>> {
    let m = svq.num_codes();
    let dim = svq.dim();
    let nf = svq.n as f64;
    let mut mass = vec![0.0; m];
    let mut mean_x = Matrix::zeros(m, dim);
    let mut mean_recon = Matrix::zeros(m, dim);
    for (x, w) in batch.iter_weighted() {
        let post = svq.forward(x)?.posterior;
        let xhat = mix_rows(&svq.codebook, &post);
        for y in 0..m {
            let p = w * post[y];
            mass[y] += p;
            axpy(mean_x.row_mut(y), p, x);
            axpy(mean_recon.row_mut(y), p, &xhat);
        }
    }
    Ok((0..m)
        .map(|y| {
            (mass[y] > 0.0).then(|| {
                let r: Vec<f64> = (0..dim)
                    .map(|k| {
                        nf * mean_x[(y, k)] / mass[y]
                            - svq.codebook.row(y)[k]
                            - (nf - 1.0) * mean_recon[(y, k)] / mass[y]
                    })
                    .collect();
                dot(&r, &r).sqrt()
            })
        })
        .collect())
}

/// Largest |Σ_{y'} (Pr(y'|x) − δ_{y,y'}) x'(y')·(½x'(y') − n x + (n−1) x̂)|
/// over batch samples and codes with Pr(y|x) above [`POSTERIOR_FLOOR`].
pub fn stationarity_residual_posterior(svq: &Svq, batch: &Batch) -> Result<f64> {
    let m = svq.num_codes();
    let nf = svq.n as f64;
    let mut worst = 0.0f64;
    let mut u = vec![0.0; m];
    for x in batch.samples() {
        let post = svq.forward(x)?.posterior;
        let xhat = mix_rows(&svq.codebook, &post);
        // u_{y'} = x'(y')·(½x'(y') − n x + (n−1) x̂)
        for (yp, uy) in u.iter_mut().enumerate() {
            let r = svq.codebook.row(yp);
            *uy = r
                .iter()
                .zip(x)
                .zip(&xhat)
                .map(|((a, xv), h)| a * (0.5 * a - nf * xv + (nf - 1.0) * h))
                .sum();
        }
        let expected: f64 = post.iter().zip(&u).map(|(p, v)| p * v).sum();
        for y in 0..m {
            if post[y] > POSTERIOR_FLOOR {
                worst = worst.max((expected - u[y]).abs());
            }
        }
    }
    Ok(worst)
}
