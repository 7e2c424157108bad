#include "modec/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "modec/rng.hpp"

namespace modec {

using nlohmann::json;

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

}  // namespace

std::string encode_base64(const std::vector<double>& values) {
    std::vector<unsigned char> bytes(values.size() * 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &values[i], 8);
        for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = (bits >> (8 * b)) & 0xff;  // little-endian
    }
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    for (std::size_t i = 0; i < bytes.size(); i += 3) {
        std::uint32_t chunk = bytes[i] << 16;
        const std::size_t rem = bytes.size() - i;
        if (rem > 1) chunk |= bytes[i + 1] << 8;
        if (rem > 2) chunk |= bytes[i + 2];
        out.push_back(kB64Alphabet[(chunk >> 18) & 0x3f]);
        out.push_back(kB64Alphabet[(chunk >> 12) & 0x3f]);
        out.push_back(rem > 1 ? kB64Alphabet[(chunk >> 6) & 0x3f] : '=');
        out.push_back(rem > 2 ? kB64Alphabet[chunk & 0x3f] : '=');
    }
    return out;
}

std::vector<double> decode_base64(const std::string& text) {
    if (text.size() % 4 != 0) throw std::invalid_argument("corrupt base64 payload: bad length");
    std::vector<unsigned char> bytes;
    bytes.reserve(text.size() / 4 * 3);
    const auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        throw std::invalid_argument("corrupt base64 payload: bad character");
    };
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int pad = 0;
        std::uint32_t chunk = 0;
        for (int k = 0; k < 4; ++k) {
            const char c = text[i + k];
            if (c == '=') {
                ++pad;
                chunk <<= 6;
            } else {
                if (pad > 0) throw std::invalid_argument("corrupt base64 payload: data after pad");
                chunk = (chunk << 6) | value_of(c);
            }
        }
        bytes.push_back((chunk >> 16) & 0xff);
        if (pad < 2) bytes.push_back((chunk >> 8) & 0xff);
        if (pad < 1) bytes.push_back(chunk & 0xff);
    }
    if (bytes.size() % 8 != 0)
        throw std::invalid_argument("corrupt payload: byte count not a multiple of 8");
    std::vector<double> values(bytes.size() / 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= std::uint64_t(bytes[i * 8 + b]) << (8 * b);
        std::memcpy(&values[i], &bits, 8);
    }
    return values;
}

Dataset load_csv(const std::string& path, std::size_t label_column) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open CSV file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty CSV file: " + path);
    std::size_t n_cols = 1 + std::count(line.begin(), line.end(), ',');
    if (label_column >= n_cols)
        throw std::invalid_argument("label column " + std::to_string(label_column) +
                                    " out of range for " + std::to_string(n_cols) + " columns");

    std::vector<double> features;
    std::vector<int> labels;
    std::size_t row_idx = 1;
    while (std::getline(in, line)) {
        ++row_idx;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(ss, cell, ',')) {
            double v;
            try {
                std::size_t used = 0;
                v = std::stod(cell, &used);
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw std::runtime_error("non-numeric cell at row " + std::to_string(row_idx) +
                                         ", column " + std::to_string(col + 1));
            }
            if (col == label_column) {
                const int lab = static_cast<int>(std::llround(v));
                if (lab < 0 || std::abs(v - lab) > 1e-9)
                    throw std::runtime_error("label must be a non-negative integer at row " +
                                             std::to_string(row_idx));
                labels.push_back(lab);
            } else {
                features.push_back(v);
            }
            ++col;
        }
        if (col != n_cols)
            throw std::runtime_error("row " + std::to_string(row_idx) + " has " +
                                     std::to_string(col) + " cells, expected " +
                                     std::to_string(n_cols));
    }
    if (labels.empty()) throw std::runtime_error("CSV has no data rows: " + path);

    Dataset ds;
    const std::size_t dim = n_cols - 1;
    ds.data.inputs = Matrix(labels.size(), dim);
    std::copy(features.begin(), features.end(), ds.data.inputs.data.begin());
    ds.data.labels = std::move(labels);
    ds.class_count = 1 + static_cast<std::size_t>(
                             *std::max_element(ds.data.labels.begin(), ds.data.labels.end()));
    return ds;
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4))
        throw std::runtime_error("truncated IDX header: " + path);
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("cannot open IDX image file: " + images_path);
    if (read_be32(img, images_path) != 0x00000803)
        throw std::runtime_error("bad IDX image magic: " + images_path);
    const std::uint32_t n = read_be32(img, images_path);
    const std::uint32_t rows = read_be32(img, images_path);
    const std::uint32_t cols = read_be32(img, images_path);
    const std::size_t dim = std::size_t(rows) * cols;
    std::vector<unsigned char> pixels(std::size_t(n) * dim);
    if (!img.read(reinterpret_cast<char*>(pixels.data()),
                  static_cast<std::streamsize>(pixels.size())))
        throw std::runtime_error("truncated IDX image payload: " + images_path);

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("cannot open IDX label file: " + labels_path);
    if (read_be32(lab, labels_path) != 0x00000801)
        throw std::runtime_error("bad IDX label magic: " + labels_path);
    if (read_be32(lab, labels_path) != n)
        throw std::runtime_error("IDX image/label count mismatch");
    std::vector<unsigned char> raw_labels(n);
    if (!lab.read(reinterpret_cast<char*>(raw_labels.data()), n))
        throw std::runtime_error("truncated IDX label payload: " + labels_path);

    Dataset ds;
    ds.data.inputs = Matrix(n, dim);
    for (std::size_t i = 0; i < pixels.size(); ++i)
        ds.data.inputs.data[i] = pixels[i] / 255.0;  // [0, 1]
    ds.data.labels.assign(raw_labels.begin(), raw_labels.end());
    ds.class_count = 1 + static_cast<std::size_t>(
                             *std::max_element(ds.data.labels.begin(), ds.data.labels.end()));
    return ds;
}

Dataset gen_synthetic(SyntheticKind kind, std::size_t n, double noise, std::uint64_t seed) {
    if (n < 4) throw std::invalid_argument("synthetic dataset needs n >= 4");
    auto rng = make_rng(seed, Stream::data);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Dataset ds;
    switch (kind) {
        case SyntheticKind::two_spirals: {
            ds.class_count = 2;
            ds.data.inputs = Matrix(n, 2);
            ds.data.labels.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                const int cls = static_cast<int>(i % 2);
                const double frac = static_cast<double>(i / 2) /
                                    std::max<double>(1.0, static_cast<double>((n + 1) / 2 - 1));
                const double r = 0.2 + 0.8 * frac;
                const double angle = 3.0 * std::numbers::pi * frac +
                                     (cls == 1 ? std::numbers::pi : 0.0);
                ds.data.inputs(i, 0) = r * std::cos(angle) + noise * gauss(rng);
                ds.data.inputs(i, 1) = r * std::sin(angle) + noise * gauss(rng);
                ds.data.labels[i] = cls;
            }
            break;
        }
        case SyntheticKind::gaussian_blobs: {
            ds.class_count = 3;
            const double centers[3][2] = {{0.0, 2.0}, {-1.8, -1.0}, {1.8, -1.0}};
            ds.data.inputs = Matrix(n, 2);
            ds.data.labels.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                const int cls = static_cast<int>(i % 3);
                ds.data.inputs(i, 0) = centers[cls][0] + noise * gauss(rng);
                ds.data.inputs(i, 1) = centers[cls][1] + noise * gauss(rng);
                ds.data.labels[i] = cls;
            }
            break;
        }
    }
    return ds;
}

SplitResult split_dataset(const Dataset& full, double train_fraction, double test_fraction,
                          std::uint64_t seed) {
    if (train_fraction <= 0.0 || test_fraction < 0.0 || train_fraction + test_fraction > 1.0)
        throw std::invalid_argument("invalid split fractions");
    const std::size_t n = full.data.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(seed, Stream::data);
    std::shuffle(order.begin(), order.end(), rng);

    const std::size_t n_train = static_cast<std::size_t>(train_fraction * n);
    const std::size_t n_test = static_cast<std::size_t>(test_fraction * n);
    const auto take = [&](std::size_t begin, std::size_t count, const std::string& tag) {
        Dataset part;
        part.class_count = full.class_count;
        part.split = tag;
        part.data.inputs = Matrix(count, full.data.inputs.cols);
        part.data.labels.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t src = order[begin + i];
            for (std::size_t j = 0; j < full.data.inputs.cols; ++j)
                part.data.inputs(i, j) = full.data.inputs(src, j);
            part.data.labels[i] = full.data.labels[src];
        }
        return part;
    };
    SplitResult out;
    out.train = take(0, n_train, "train");
    out.test = take(n_train, n_test, "test");
    out.heldout = take(n_train + n_test, n - n_train - n_test, "heldout");
    return out;
}

Normalization compute_normalization(const Batch& train) {
    if (train.size() == 0) throw std::invalid_argument("empty training batch");
    Normalization norm;
    const std::size_t dim = train.inputs.cols;
    norm.mean.assign(dim, 0.0);
    norm.scale.assign(dim, 1.0);
    const double inv_n = 1.0 / static_cast<double>(train.size());
    for (std::size_t j = 0; j < dim; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < train.size(); ++i) m += train.inputs(i, j);
        m *= inv_n;
        double var = 0.0;
        for (std::size_t i = 0; i < train.size(); ++i) {
            const double d = train.inputs(i, j) - m;
            var += d * d;
        }
        const double sd = std::sqrt(var * inv_n);
        norm.mean[j] = m;
        norm.scale[j] = sd > 0.0 ? sd : 1.0;
    }
    return norm;
}

void apply_normalization(Batch& batch, const Normalization& norm) {
    if (batch.inputs.cols != norm.mean.size())
        throw std::invalid_argument("normalization width mismatch");
    for (std::size_t i = 0; i < batch.size(); ++i)
        for (std::size_t j = 0; j < batch.inputs.cols; ++j)
            batch.inputs(i, j) = (batch.inputs(i, j) - norm.mean[j]) / norm.scale[j];
}

namespace {

json architecture_json(const MLPConfig& config) {
    return json{{"layer_sizes", config.layer_sizes},
                {"activation", "relu"},
                {"batch_norm", config.batch_norm},
                {"l2_coeff", config.l2_coeff}};
}

MLPConfig architecture_from_json(const json& j) {
    MLPConfig config;
    config.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    if (j.at("activation").get<std::string>() != "relu")
        throw std::runtime_error("unsupported activation in checkpoint");
    config.batch_norm = j.at("batch_norm").get<bool>();
    config.l2_coeff = j.at("l2_coeff").get<double>();
    config.validate();
    return config;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    json j;
    in >> j;
    return j;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

void save_checkpoint(const WeightVector& w, const MLPConfig& config, std::uint64_t seed,
                     const std::string& path) {
    json j{{"format_version", kCheckpointFormatVersion},
           {"architecture", architecture_json(config)},
           {"seed", seed},
           {"param_count", w.values.size()},
           {"payload_encoding", "base64-f64-le"},
           {"payload", encode_base64(w.values)}};
    write_text_file(path, j.dump(2) + "\n");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    const json j = read_json_file(path);
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion)
        throw std::runtime_error("checkpoint format version mismatch");
    LoadedCheckpoint out;
    out.config = architecture_from_json(j.at("architecture"));
    out.seed = j.at("seed").get<std::uint64_t>();
    out.weights.layout = WeightLayout::from_config(out.config);
    out.weights.values = decode_base64(j.at("payload").get<std::string>());
    const std::size_t declared = j.at("param_count").get<std::size_t>();
    if (out.weights.values.size() != declared)
        throw std::runtime_error("checkpoint param_count does not match payload");
    if (declared != out.weights.layout.param_count)
        throw std::runtime_error("checkpoint architecture does not match param_count");
    return out;
}

void save_curve(const CurveSpec& spec, const MLPConfig& config, const std::string& path) {
    spec.validate();
    std::vector<double> payload = spec.start.values;
    for (const auto& b : spec.bends)
        payload.insert(payload.end(), b.values.begin(), b.values.end());
    payload.insert(payload.end(), spec.end.values.begin(), spec.end.values.end());
    const char* kind = spec.kind == CurveKind::segment    ? "segment"
                       : spec.kind == CurveKind::polychain ? "polychain"
                                                           : "bezier";
    json j{{"format_version", kCheckpointFormatVersion},
           {"architecture", architecture_json(config)},
           {"kind", kind},
           {"n_bends", spec.n_bends()},
           {"param_count", spec.start.values.size()},
           {"payload_encoding", "base64-f64-le"},
           {"payload", encode_base64(payload)}};
    write_text_file(path, j.dump(2) + "\n");
}

LoadedCurve load_curve(const std::string& path) {
    const json j = read_json_file(path);
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion)
        throw std::runtime_error("curve file format version mismatch");
    LoadedCurve out;
    out.config = architecture_from_json(j.at("architecture"));
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "segment")
        out.spec.kind = CurveKind::segment;
    else if (kind == "polychain")
        out.spec.kind = CurveKind::polychain;
    else if (kind == "bezier")
        out.spec.kind = CurveKind::bezier;
    else
        throw std::runtime_error("unknown curve kind: " + kind);

    const std::size_t n_bends = j.at("n_bends").get<std::size_t>();
    const std::size_t count = j.at("param_count").get<std::size_t>();
    const WeightLayout layout = WeightLayout::from_config(out.config);
    if (count != layout.param_count)
        throw std::runtime_error("curve file architecture does not match param_count");
    const std::vector<double> payload = decode_base64(j.at("payload").get<std::string>());
    if (payload.size() != count * (n_bends + 2))
        throw std::runtime_error("curve payload does not match node count");

    const auto slice = [&](std::size_t node) {
        WeightVector w;
        w.layout = layout;
        w.values.assign(payload.begin() + node * count, payload.begin() + (node + 1) * count);
        return w;
    };
    out.spec.start = slice(0);
    for (std::size_t b = 0; b < n_bends; ++b) out.spec.bends.push_back(slice(b + 1));
    out.spec.end = slice(n_bends + 1);
    out.spec.validate();
    return out;
}

namespace {

json aggregates_json(const MetricAggregates& agg) {
    return json{{"min", agg.min}, {"max", agg.max}, {"int", agg.integral}, {"mean", agg.mean}};
}

}  // namespace

void write_curve_report(const CurveEvalReport& report, const std::string& path,
                        ReportFormat format) {
    if (format == ReportFormat::csv) {
        std::ostringstream out;
        out << "t,train_loss,train_error,test_loss,test_error\n";
        for (std::size_t i = 0; i < report.t_grid.size(); ++i)
            out << fmt17(report.t_grid[i]) << ',' << fmt17(report.train_loss[i]) << ','
                << fmt17(report.train_error[i]) << ',' << fmt17(report.test_loss[i]) << ','
                << fmt17(report.test_error[i]) << '\n';
        write_text_file(path, out.str());
        return;
    }
    json j{{"t", report.t_grid},
           {"train_loss", report.train_loss},
           {"train_error", report.train_error},
           {"test_loss", report.test_loss},
           {"test_error", report.test_error},
           {"aggregates",
            {{"train_loss", aggregates_json(report.train_loss_agg)},
             {"train_error", aggregates_json(report.train_error_agg)},
             {"test_loss", aggregates_json(report.test_loss_agg)},
             {"test_error", aggregates_json(report.test_error_agg)}}},
           {"length_ratio", report.length_ratio}};
    write_text_file(path, j.dump(2) + "\n");
}

void write_plane_grid(const PlaneGrid& grid, const std::string& path, ReportFormat format) {
    if (format == ReportFormat::csv) {
        std::ostringstream out;
        out << "x,y,loss,error\n";
        for (std::size_t r = 0; r < grid.ys.size(); ++r)
            for (std::size_t c = 0; c < grid.xs.size(); ++c)
                out << fmt17(grid.xs[c]) << ',' << fmt17(grid.ys[r]) << ','
                    << fmt17(grid.loss(r, c)) << ',' << fmt17(grid.error(r, c)) << '\n';
        write_text_file(path, out.str());
        return;
    }
    json j{{"xs", grid.xs},
           {"ys", grid.ys},
           {"loss", grid.loss.data},
           {"error", grid.error.data},
           {"anchors",
            {{"w1", {0.0, 0.0}}, {"w2", {grid.x2, 0.0}}, {"w3", {grid.x3, grid.y3}}}}};
    write_text_file(path, j.dump(2) + "\n");
}

void write_chain_report(const ChainReport& report, const std::string& path,
                        ReportFormat format) {
    if (format == ReportFormat::csv) {
        std::ostringstream out;
        out << "position,train_loss,train_error,test_loss,test_error,is_knot\n";
        std::size_t next_knot = 0;
        for (std::size_t i = 0; i < report.positions.size(); ++i) {
            const bool knot = next_knot < report.knot_indices.size() &&
                              report.knot_indices[next_knot] == i;
            if (knot) ++next_knot;
            out << fmt17(report.positions[i]) << ',' << fmt17(report.train_loss[i]) << ','
                << fmt17(report.train_error[i]) << ',' << fmt17(report.test_loss[i]) << ','
                << fmt17(report.test_error[i]) << ',' << (knot ? 1 : 0) << '\n';
        }
        write_text_file(path, out.str());
        return;
    }
    json j{{"position", report.positions},
           {"train_loss", report.train_loss},
           {"train_error", report.train_error},
           {"test_loss", report.test_loss},
           {"test_error", report.test_error},
           {"knot_indices", report.knot_indices}};
    write_text_file(path, j.dump(2) + "\n");
}

}  // namespace modec
