//! Central-difference check of every layer class, then a deliberately
//! broken backward pass to show the check catches it.

use graspfuse::nn::BackwardFault;
use graspfuse::train::{gradient_check, gradient_check_with_fault, GradCheckConfig};

fn main() -> graspfuse::Result<()> {
    let cfg = GradCheckConfig::default();
    let r = gradient_check(&cfg)?;
    for c in &r.classes {
        println!("{:?} ({:?}): {} params, max rel err {:.2e}", c.group, c.mode, c.checked, c.max_rel_error);
    }
    println!("overall {:.2e} over {} params ({} resampled)", r.max_rel_error, r.checked, r.skipped);

    let bad = gradient_check_with_fault(&cfg, BackwardFault::ReluLeak)?;
    println!("with injected fault: {:.2e}", bad.max_rel_error);
    Ok(())
}
