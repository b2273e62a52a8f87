//! The episode CSV reader must never panic, for either header width.

#![no_main]
use libfuzzer_sys::fuzz_target;
use tpg::env::TaskId;
use tpg::trace::read_episode_csv;

fuzz_target!(|data: &[u8]| {
    // one task with a single hidden variable, one with two
    let _ = read_episode_csv(data, TaskId::MountainCar);
    let _ = read_episode_csv(data, TaskId::CartPole);
});
