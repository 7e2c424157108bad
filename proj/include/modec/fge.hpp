#pragma once

#include <cstdint>
#include <vector>

#include "modec/mlp.hpp"

namespace modec {

// Triangular cyclic schedule: starts at alpha1, hits alpha2 at mid-cycle,
// climbs back to alpha1 at the end of each cycle of c iterations.
struct CyclicLRSchedule {
    double alpha1 = 0.05;
    double alpha2 = 0.0005;
    std::size_t cycle_length = 40;  // must be even

    void validate() const;
};

// lr for 1-based iteration index i.
double lr_at(const CyclicLRSchedule& schedule, std::size_t i);

struct PretrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 64;
    double learning_rate = 0.05;
    double momentum = 0.9;
};

// Standard single-model run used to initialize FGE: constant lr, decayed by
// 10x at 50% and 75% of the budget. Zero epochs returns the fresh init.
WeightVector pretrain(const MLPConfig& net_config, const Batch& train_set,
                      const PretrainConfig& cfg, std::uint64_t seed);

struct FGERunConfig {
    std::size_t n_iterations = 240;
    CyclicLRSchedule schedule;
    std::size_t batch_size = 64;
    double momentum = 0.0;  // Alg-style plain SGD by default
    std::uint64_t seed = 0;

    void validate() const;
};

// Cyclic-lr SGD from a pretrained point; a checkpoint is collected at every
// mid-cycle lr minimum, i.e. whenever mod(i, c) = c/2.
std::vector<WeightVector> fge_run(const WeightVector& start, const MLPConfig& net_config,
                                  const Batch& train_set, const FGERunConfig& cfg);

struct ChainReport {
    std::vector<double> positions;  // global parameter in [0, n_checkpoints-1]
    std::vector<double> train_loss;
    std::vector<double> train_error;
    std::vector<double> test_loss;
    std::vector<double> test_error;
    std::vector<std::size_t> knot_indices;  // rows that sit exactly on a checkpoint
};

// Loss/error along the polygonal chain through consecutive checkpoints.
ChainReport fge_chain_report(const std::vector<WeightVector>& checkpoints,
                             const MLPConfig& net_config, const Batch& train_set,
                             const Batch& test_set, std::size_t points_per_segment);

}  // namespace modec
