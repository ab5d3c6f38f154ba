//! Ground-truth grasp maps for a hand-drawn mask.

use graspfuse::labeler::label_ground_truth;
use graspfuse::BinaryMask;

fn main() -> graspfuse::Result<()> {
    // A tilted bar plus a stray blob that the largest-component step drops.
    let mask = BinaryMask::from_fn(48, 48, |u, v| {
        let (x, y) = (u as f64 - 24.0, v as f64 - 24.0);
        let along = 0.8 * x + 0.6 * y;
        let across = -0.6 * x + 0.8 * y;
        (along.abs() <= 14.0 && across.abs() <= 5.0) || (u < 4 && v < 4)
    });
    let label = label_ground_truth(&mask)?;
    let c = label.chord;
    println!(
        "center ({}, {}), chord {:.1} px at {:.1} deg, min-area rect {:.1} x {:.1}",
        c.center.0,
        c.center.1,
        c.length,
        c.theta.to_degrees(),
        label.rect.width,
        label.rect.height
    );
    println!("positive window: {} px", label.window.count());
    for v in (8..40).step_by(2) {
        let row: String = (4..44)
            .map(|u| match (*label.window.at(u, v), *mask.at(u, v)) {
                (true, _) => 'o',
                (false, true) => '#',
                _ => '.',
            })
            .collect();
        println!("{row}");
    }
    Ok(())
}
