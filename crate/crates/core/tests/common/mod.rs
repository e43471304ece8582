#![allow(dead_code)]

use swarm_gan::config::RunConfig;

/// Two-class Gaussian task with 600 training and 150 test rows, hard enough for label
/// skew to cost AUC.
pub fn skewed_gaussian(seed: u64, beta: f64, method: &str) -> RunConfig {
    RunConfig::from_toml(&format!(
        "seed = {seed}\n\
         [dataset]\nkind = \"gaussian\"\nn_per_class = 375\nn_features = 100\nseparation = 3.0\noffset = 3.0\n\
         [partition]\nn_participants = 3\nbeta = {beta}\n\
         [swarm]\nsync_interval = 50\nlocal_steps = 500\n\
         [classifier]\nhidden = [64, 32]\nbatch_size = 32\n\
         schedule = {{ base = 0.05, decay = 0.001, form = \"inverse-time\" }}\n\
         [method]\nname = \"{method}\"\nmixup_alpha = 1.0\nmu = 0.01\n"
    ))
    .expect("valid config")
}

/// Small end-to-end config used where only plumbing matters.
pub fn small(seed: u64, beta: f64, method: &str) -> String {
    format!(
        "seed = {seed}\n\
         [dataset]\nkind = \"gaussian\"\nn_per_class = 60\nseparation = 3.0\n\
         [partition]\nn_participants = 3\nbeta = {beta}\n\
         [swarm]\nsync_interval = 5\nlocal_steps = 40\n\
         [classifier]\nhidden = [16]\nbatch_size = 16\n\
         [gan]\nnoise_dim = 4\ngenerator_hidden = [16]\ndiscriminator_hidden = [16]\nbatch_size = 16\n\
         d_schedule = {{ base = 0.05, decay = 0.003, form = \"inverse-time\" }}\n\
         g_schedule = {{ base = 0.05, decay = 0.003, form = \"inverse-time\" }}\n\
         sync_interval = 5\nlocal_steps = 40\n\
         [method]\nname = \"{method}\"\nmu = 0.0\nmixup_alpha = 1.0\n\
         [eval]\nseeds = [1]\n"
    )
}

pub fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}
