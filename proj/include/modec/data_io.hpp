#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "modec/curve.hpp"
#include "modec/eval.hpp"
#include "modec/fge.hpp"
#include "modec/mlp.hpp"

namespace modec {

struct Normalization {
    std::vector<double> mean;
    std::vector<double> scale;  // 1 where the feature is constant
};

struct Dataset {
    Batch data;
    std::size_t class_count = 0;
    std::string split = "train";
};

Dataset load_csv(const std::string& path, std::size_t label_column);

// Uncompressed IDX pair (MNIST layout): big-endian header, uint8 payload.
// Pixels are scaled to [0, 1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

enum class SyntheticKind { two_spirals, gaussian_blobs };

Dataset gen_synthetic(SyntheticKind kind, std::size_t n, double noise, std::uint64_t seed);

// Deterministic shuffled split into train/test (and the remainder as a
// held-out set when the fractions leave room).
struct SplitResult {
    Dataset train;
    Dataset test;
    Dataset heldout;
};
SplitResult split_dataset(const Dataset& full, double train_fraction, double test_fraction,
                          std::uint64_t seed);

Normalization compute_normalization(const Batch& train);
void apply_normalization(Batch& batch, const Normalization& norm);

// Single-file checkpoint: JSON header, parameters as base64 little-endian
// IEEE-754 doubles. Round-trips bit-exactly.
inline constexpr int kCheckpointFormatVersion = 1;

void save_checkpoint(const WeightVector& w, const MLPConfig& config, std::uint64_t seed,
                     const std::string& path);

struct LoadedCheckpoint {
    WeightVector weights;
    MLPConfig config;
    std::uint64_t seed = 0;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

void save_curve(const CurveSpec& spec, const MLPConfig& config, const std::string& path);

struct LoadedCurve {
    CurveSpec spec;
    MLPConfig config;
};
LoadedCurve load_curve(const std::string& path);

enum class ReportFormat { csv, json };

void write_curve_report(const CurveEvalReport& report, const std::string& path,
                        ReportFormat format);
void write_plane_grid(const PlaneGrid& grid, const std::string& path, ReportFormat format);
void write_chain_report(const ChainReport& report, const std::string& path,
                        ReportFormat format);

std::string encode_base64(const std::vector<double>& values);
std::vector<double> decode_base64(const std::string& text);

}  // namespace modec
