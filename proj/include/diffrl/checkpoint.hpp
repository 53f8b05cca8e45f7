// Copyright (c) 2026 diffrl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "diffrl/student.hpp"

namespace diffrl {

// Binary checkpoint format, little-endian throughout:
//   magic "DFRLCKPT", u32 version, u32 kind (0 teacher / 1 student),
//   u32 activation, u32 time_features, u32 extra_dim,
//   u32 layer count, u32 widths[...],
//   schedule block: u32 kind, u32 steps, f64 beta_min, f64 beta_max,
//   u64 seed, u64 param count, f64 params[...].
// Student checkpoints append: u32 K, u32 taus[K+1], u32 strategy,
// u32 cond_dim, f64 log_stds[K].
// Loading reproduces parameters bit-exactly.

struct TeacherCheckpoint {
    Denoiser net;
    NoiseSchedule schedule;
    uint64_t seed = 0;
};

void save_teacher(const std::string& path, const Denoiser& net, const NoiseSchedule& schedule,
                  uint64_t seed);
TeacherCheckpoint load_teacher(const std::string& path);

void save_student(const std::string& path, const StudentPolicy& policy, uint64_t seed);
StudentPolicy load_student(const std::string& path);

}  // namespace diffrl
