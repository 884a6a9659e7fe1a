//! Prints the learning-rate landmarks each training preset would follow for a
//! 20,000-image epoch.

use camtrap::schedule::lr_at;
use camtrap::trainer::Preset;

fn main() -> camtrap::Result<()> {
    let images = 20_000;
    println!("{:<8} {:>6} {:>7} {:>11} {:>11} {:>11}", "preset", "steps", "warmup", "lr(0)", "lr(peak)", "lr(mid)");
    for preset in Preset::ALL {
        let config = preset.config(0);
        let schedule = config.reference_schedule(images)?;
        let total = schedule.total_steps;
        let w = schedule.warmup_steps;
        let mid = w + (total - 1 - w) / 2;
        println!(
            "{:<8} {:>6} {:>7} {:>11.3e} {:>11.3e} {:>11.3e}",
            preset.to_string(),
            total,
            w,
            lr_at(0, &schedule)?,
            lr_at(w, &schedule)?,
            lr_at(mid, &schedule)?,
        );
    }
    Ok(())
}
