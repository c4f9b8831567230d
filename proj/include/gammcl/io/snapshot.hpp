// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared pieces of the snapshot formats: every file starts with "GAMM",
// u32 version and u32 kind.

#include <cstdint>
#include <string>
#include <vector>

#include "gammcl/error.hpp"
#include "gammcl/io/binary.hpp"
#include "gammcl/numcore/mlp.hpp"

namespace gammcl::io {

inline constexpr std::uint32_t kSnapshotVersion = 1;
inline constexpr std::uint32_t kKindPosterior = 1;
inline constexpr std::uint32_t kKindGamm = 2;

inline void write_spec(BinaryWriter& w, const MlpSpec& spec) {
    w.u32(static_cast<std::uint32_t>(spec.layer_widths.size()));
    for (std::size_t width : spec.layer_widths) w.u32(static_cast<std::uint32_t>(width));
    w.u32(static_cast<std::uint32_t>(spec.activation.kind));
    w.f64(spec.activation.slope);
    for (std::size_t l = 0; l < spec.num_layers(); ++l) w.u8(spec.bias(l) ? 1 : 0);
}

inline MlpSpec read_spec(BinaryReader& r) {
    const std::uint32_t n = r.u32();
    if (n < 2 || n > 4096) throw DataError(r.name() + ": implausible layer count " + std::to_string(n));
    std::vector<std::size_t> widths(n);
    for (auto& w : widths) w = r.u32();
    const std::uint32_t kind = r.u32();
    if (kind > static_cast<std::uint32_t>(ActivationKind::Identity)) throw DataError(r.name() + ": bad activation");
    Activation act{static_cast<ActivationKind>(kind), r.f64()};
    std::vector<bool> bias(n - 1);
    for (std::size_t l = 0; l + 1 < n; ++l) bias[l] = r.u8() != 0;
    try {
        return MlpSpec(std::move(widths), act, std::move(bias));
    } catch (const ShapeError& e) {
        throw DataError(r.name() + ": " + e.what());
    }
}

inline void expect_header(BinaryReader& r, std::uint32_t kind) {
    if (r.bytes(4) != "GAMM") throw DataError(r.name() + ": bad magic");
    const std::uint32_t version = r.u32();
    if (version != kSnapshotVersion) throw DataError(r.name() + ": unsupported version " + std::to_string(version));
    const std::uint32_t got = r.u32();
    if (got != kind) throw DataError(r.name() + ": snapshot kind " + std::to_string(got) + ", expected " + std::to_string(kind));
}

} // namespace gammcl::io
