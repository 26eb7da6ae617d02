//! Default pipeline parameters.

/// Clip length in seconds.
pub const WINDOW_LENGTH_S: f64 = 4.0;
/// Pose sampling rate.
pub const FPS: f64 = 32.0;
/// Expert candidates kept per learner instance in the training split.
pub const K_TRAIN: usize = 5;
/// Expert candidates kept per learner instance in the test split.
pub const K_TEST: usize = 1;
pub const TEST_FRACTION: f64 = 0.05;
pub const SEED: u64 = 0;
pub const CODEBOOK_SIZE: usize = 512;
/// Cut-off for recall@k in retrieval reports.
pub const RECALL_K: usize = 50;
pub const LLM_MAX_RETRIES: u32 = 3;
