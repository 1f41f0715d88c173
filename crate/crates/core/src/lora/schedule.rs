//! Linear-warmup cosine-decay learning-rate schedule.

use super::LoraError;

/// Linear ramp from 0 to `peak_lr` over the first `warmup_ratio *
/// total_steps` steps, then cosine decay to 0 at `total_steps`. Continuous
/// at the joint.
pub fn cosine_warmup_lr(
    step: usize,
    total_steps: usize,
    warmup_ratio: f64,
    peak_lr: f64,
) -> Result<f64, LoraError> {
    if total_steps == 0 {
        return Err(LoraError::Config("total_steps must be positive".into()));
    }
    if step > total_steps {
        return Err(LoraError::Config(format!(
            "step {step} beyond total_steps {total_steps}"
        )));
    }
    if !(0.0..1.0).contains(&warmup_ratio) {
        return Err(LoraError::Config(format!(
            "warmup_ratio {warmup_ratio} outside [0,1)"
        )));
    }
    if peak_lr <= 0.0 {
        return Err(LoraError::Config("peak_lr must be positive".into()));
    }
    let warmup = warmup_ratio * total_steps as f64;
    let s = step as f64;
    if s < warmup {
        return Ok(peak_lr * s / warmup);
    }
    let progress = (s - warmup) / (total_steps as f64 - warmup);
    Ok(peak_lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()))
}
