// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dataset ingestion: IDX image/label pairs and plain CSV (label, v1..vD).

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <span>
#include <utility>
#include <string>
#include <string_view>
#include <vector>

#include "gammcl/dataset.hpp"
#include "gammcl/error.hpp"

namespace gammcl::io {

enum class DataSource { IdxFiles, SyntheticSpec, Csv };

struct DatasetHandle {
    LabeledData data;
    DataSource source = DataSource::Csv;
};

inline std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

namespace detail {
inline std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t at, const std::string& path) {
    if (at + 4 > b.size()) throw DataError(path + ": truncated IDX header");
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
           std::uint32_t{b[at + 3]};
}
} // namespace detail

inline constexpr std::uint32_t kIdxImageMagic = 2051;
inline constexpr std::uint32_t kIdxLabelMagic = 2049;

// Images are flattened row-major and scaled by 1/255. The class count is the
// largest label plus one.
inline DatasetHandle load_idx(const std::string& images_path, const std::string& labels_path) {
    const auto img = read_file(images_path);
    const auto lab = read_file(labels_path);
    if (const auto m = detail::be32(img, 0, images_path); m != kIdxImageMagic) {
        throw DataError(images_path + ": bad IDX image magic " + std::to_string(m) + " (expected 2051)");
    }
    if (const auto m = detail::be32(lab, 0, labels_path); m != kIdxLabelMagic) {
        throw DataError(labels_path + ": bad IDX label magic " + std::to_string(m) + " (expected 2049)");
    }
    const std::size_t n = detail::be32(img, 4, images_path);
    const std::size_t rows = detail::be32(img, 8, images_path);
    const std::size_t cols = detail::be32(img, 12, images_path);
    const std::size_t n_labels = detail::be32(lab, 4, labels_path);
    if (n != n_labels) {
        throw DataError("IDX count mismatch: " + std::to_string(n) + " images vs " + std::to_string(n_labels) + " labels");
    }
    const std::size_t d = rows * cols;
    if (d == 0) throw DataError(images_path + ": zero-sized images");
    if (img.size() < 16 + n * d) throw DataError(images_path + ": truncated, expected " + std::to_string(n * d) + " pixel bytes");
    if (lab.size() < 8 + n) throw DataError(labels_path + ": truncated, expected " + std::to_string(n) + " label bytes");

    DatasetHandle h;
    h.source = DataSource::IdxFiles;
    auto& x = h.data.x;
    x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = img[16 + i * d + j] / 255.0;
        }
    }
    h.data.y.resize(n);
    int max_label = -1;
    for (std::size_t i = 0; i < n; ++i) {
        h.data.y[i] = lab[8 + i];
        max_label = std::max(max_label, h.data.y[i]);
    }
    h.data.num_classes = max_label + 1;
    return h;
}

inline void save_idx(const LabeledData& data, std::size_t rows, std::size_t cols, const std::string& images_path,
                     const std::string& labels_path) {
    if (rows * cols != data.dim()) throw ShapeError("save_idx: image shape does not match data dimension");
    auto put32 = [](std::string& s, std::uint32_t v) {
        for (int sh = 24; sh >= 0; sh -= 8) s.push_back(static_cast<char>((v >> sh) & 0xFF));
    };
    std::string img, lab;
    put32(img, kIdxImageMagic);
    put32(img, static_cast<std::uint32_t>(data.size()));
    put32(img, static_cast<std::uint32_t>(rows));
    put32(img, static_cast<std::uint32_t>(cols));
    put32(lab, kIdxLabelMagic);
    put32(lab, static_cast<std::uint32_t>(data.size()));
    for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.x.cols(); ++j) {
            img.push_back(static_cast<char>(static_cast<unsigned char>(std::clamp(data.x(i, j), 0.0, 1.0) * 255.0 + 0.5)));
        }
        lab.push_back(static_cast<char>(data.y[static_cast<std::size_t>(i)]));
    }
    for (const auto& [path, bytes] : {std::pair{images_path, &img}, std::pair{labels_path, &lab}}) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out || !out.write(bytes->data(), static_cast<std::streamsize>(bytes->size()))) {
            throw DataError("cannot write " + path);
        }
    }
}

// One example per line: integer label, then the feature values. Blank lines
// and lines starting with '#' are skipped. `num_classes` <= 0 infers the
// class count from the largest label.
inline LabeledData parse_csv(std::string_view text, const std::string& origin, int num_classes = 0) {
    LabeledData out;
    std::vector<double> values;
    std::size_t dim = 0;
    std::size_t line_no = 0;
    std::size_t rows = 0;
    int max_label = -1;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        const std::string where = origin + ":" + std::to_string(line_no);
        std::size_t field = 0;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            std::string_view tok = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
            while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
            while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
            if (field == 0) {
                int label = 0;
                const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), label);
                if (ec != std::errc{} || p != tok.data() + tok.size() || label < 0) {
                    throw DataError(where + ": bad label '" + std::string(tok) + "'");
                }
                out.y.push_back(label);
                max_label = std::max(max_label, label);
            } else {
                double v = 0.0;
                const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
                if (ec != std::errc{} || p != tok.data() + tok.size()) {
                    throw DataError(where + ": bad value '" + std::string(tok) + "' in column " + std::to_string(field));
                }
                values.push_back(v);
            }
            ++field;
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (field < 2) throw DataError(where + ": expected a label and at least one value");
        if (rows == 0) dim = field - 1;
        if (field - 1 != dim) {
            throw DataError(where + ": " + std::to_string(field - 1) + " values, expected " + std::to_string(dim));
        }
        ++rows;
    }
    if (rows == 0) throw DataError(origin + ": no data rows");
    out.x = Eigen::Map<const RowMatrix>(values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
    out.num_classes = num_classes > 0 ? num_classes : max_label + 1;
    out.validate();
    return out;
}

inline DatasetHandle load_csv(const std::string& path, int num_classes = 0) {
    const auto bytes = read_file(path);
    DatasetHandle h;
    h.source = DataSource::Csv;
    h.data = parse_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), path, num_classes);
    return h;
}

// Values are written with 17 significant digits so that they reload exactly.
inline std::string to_csv(const Matrix& x, std::span<const int> labels) {
    if (static_cast<std::size_t>(x.rows()) != labels.size()) throw ShapeError("to_csv: row/label count mismatch");
    std::string out;
    char buf[40];
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        out += std::to_string(labels[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            std::snprintf(buf, sizeof buf, ",%.17g", x(i, j));
            out += buf;
        }
        out += '\n';
    }
    return out;
}

inline void write_text(const std::string& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size()))) throw DataError("cannot write " + path);
}

inline void save_csv(const LabeledData& data, const std::string& path) { write_text(path, to_csv(data.x, data.y)); }

} // namespace gammcl::io
