use agils::harness::{run_sgl, AgilsOverrides, SglBlock};
use agils::inner::InnerMethod;

fn main() {
    let block = SglBlock::default();
    for seed in [18u64, 3, 11] {
        let base = run_sgl(&block, seed, &AgilsOverrides::default()).unwrap();
        let admm = run_sgl(&block, seed, &AgilsOverrides {
            inner_method: Some(InnerMethod::Admm),
            ..Default::default()
        }).unwrap();
        // contract-compliant over-achiever: same schedules, but inner
        // solves land at half the allowed residual
        let tight = run_sgl(&block, seed, &AgilsOverrides {
            s0: Some(2.5),
            tau0: Some(5.0),
            ..Default::default()
        }).unwrap();
        println!(
            "seed {seed}: pgm val={:.1} (x? outer={}), admm val={:.1} ({:+.1}%), tight-pgm val={:.1} ({:+.1}%)",
            base.metrics.val_err, base.outcome.trace.outer_iterations,
            admm.metrics.val_err,
            100.0 * (admm.metrics.val_err - base.metrics.val_err) / base.metrics.val_err,
            tight.metrics.val_err,
            100.0 * (tight.metrics.val_err - base.metrics.val_err) / base.metrics.val_err,
        );
    }
}
