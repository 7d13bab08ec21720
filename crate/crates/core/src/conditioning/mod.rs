//! Per-step conditioning plans and mean-preserving token weighting.

mod embedding;
mod schedule;

pub use embedding::{
    schedule_conditioning, step_conditioning, weight_embeddings, EmbeddingError, EmbeddingMatrix, MEAN_EPSILON,
};
pub use schedule::{active_steps, build_schedule, step_time, PromptSchedule, StepPlan};
