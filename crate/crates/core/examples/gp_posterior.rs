//! Posterior mean and standard deviation of a 1-D GP after five noisy
//! observations, before and after refitting the kernel hyperparameters.

use codesign::gp::GpModel;

fn main() -> codesign::Result<()> {
    let xs = [0.05, 0.2, 0.45, 0.7, 0.9];
    let f = |x: f64| (6.0 * x).sin() + 0.3 * x;
    let mut gp = GpModel::standardized(1, 0.6, 1e-4)?;
    gp.fit(xs.iter().map(|&x| vec![x]).collect(), xs.iter().map(|&x| f(x)).collect())?;

    let show = |gp: &GpModel| {
        println!("   x     f(x)    mean     sd");
        for i in 0..=10 {
            let x = i as f64 / 10.0;
            let (m, v) = gp.posterior(&[x]);
            println!("{x:5.2} {:8.3} {m:8.3} {:6.3}", f(x), v.sqrt());
        }
    };
    println!("log marginal likelihood {:.3}", gp.log_marginal_likelihood());
    show(&gp);

    gp.refit_hyperparameters()?;
    println!("\nrefit: lengthscale {:.3}, log marginal likelihood {:.3}", gp.kernel().lengthscales[0], gp.log_marginal_likelihood());
    show(&gp);
    Ok(())
}
