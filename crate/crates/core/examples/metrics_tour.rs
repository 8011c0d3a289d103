//! Saliency and quality metrics on small hand-made inputs.
//!
//! ```text
//! cargo run -p dagr-vqa --example metrics_tour
//! ```

use dagr_tensor::Tensor;
use dagr_vqa::eval::stats::{paired_t_test, plcc, srcc, wilcoxon_signed_rank};
use dagr_vqa::objectives::{auc_judd, cc_metric, nss};

fn main() -> dagr_vqa::Result<()> {
    // one 3x3 frame, fixation in the centre
    let fix = Tensor::new([1, 3, 3], vec![0., 0., 0., 0., 1., 0., 0., 0., 0.])?;
    let peaked = Tensor::new([1, 3, 3], vec![0.1, 0.2, 0.1, 0.2, 0.9, 0.2, 0.1, 0.2, 0.1])?;
    let flat = Tensor::new([1, 3, 3], vec![0.5; 9])?;
    let offset = Tensor::new([1, 3, 3], vec![0.9, 0.2, 0.1, 0.2, 0.1, 0.2, 0.1, 0.2, 0.1])?;

    for (name, map) in [("peaked", &peaked), ("offset", &offset)] {
        println!(
            "{name:<7} NSS {:+.3}  AUC-J {:.3}  CC vs peaked {:+.3}",
            nss(map, &fix)?,
            auc_judd(map, &fix)?,
            cc_metric(map, &peaked)?
        );
    }
    println!("flat    AUC-J {:.3} (chance)", auc_judd(&flat, &fix)?);

    let mos = [1.2, 2.5, 3.1, 3.8, 4.6, 2.0, 4.1];
    let good = [1.5, 2.4, 3.0, 3.5, 4.4, 2.2, 4.3];
    let noisy = [2.5, 2.0, 3.9, 3.0, 4.0, 3.1, 3.6];
    for (name, p) in [("good", &good), ("noisy", &noisy)] {
        println!("{name:<5} SRCC {:.3}  PLCC {:.3}", srcc(p, &mos)?, plcc(p, &mos)?);
    }
    let cubed: Vec<f64> = good.iter().map(|x| x * x * x).collect();
    println!("good^3 SRCC {:.3} (ranks unchanged)", srcc(&cubed, &mos)?);

    let err = |p: &[f64]| -> Vec<f64> { p.iter().zip(&mos).map(|(a, b)| (a - b).abs()).collect() };
    let (eg, en) = (err(&good), err(&noisy));
    println!(
        "absolute errors, good vs noisy: paired t p = {:.4}, Wilcoxon p = {:.4}",
        paired_t_test(&eg, &en)?,
        wilcoxon_signed_rank(&eg, &en)?
    );
    Ok(())
}
