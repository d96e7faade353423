#pragma once

#include "msflow/fields.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace msflow {

/// Layout of an SPE10-style whitespace-separated permeability file.
///
/// Values run x-fastest, then y, then z. A file may hold several channels
/// (kx, ky, kz) back to back; `channel` selects one of them.
struct Spe10Layout {
    Index3 dims{60, 220, 85};
    int channels = 1;
    int channel = 0;
    int first_layer = 0; ///< inclusive, along z
    int last_layer = -1; ///< inclusive, -1 means the last one
};

PermeabilityField load_spe10(std::istream& in, const Spe10Layout& layout);
PermeabilityField load_spe10(const std::filesystem::path& path, const Spe10Layout& layout);

enum class SyntheticKind { uniform, layered, channel };
SyntheticKind parse_synthetic_kind(const std::string& name);

/// Desk-scale stand-ins for SPE10 heterogeneity; max/min equals `contrast`
/// for the layered and channel kinds.
PermeabilityField gen_synthetic(SyntheticKind kind, Index3 dims, double contrast, std::uint64_t seed);

void write_permeability(const std::filesystem::path& path, const PermeabilityField& field);

/// One row of a time series: time instant, method tag and values.
struct SeriesRecord {
    double t = 0.0;
    std::string method;
    std::vector<double> values;
};

struct Series {
    std::vector<std::string> columns; ///< names of the value columns
    std::vector<SeriesRecord> records;
};

/// CSV with header `t,method,<columns...>`, one row per record.
void write_series(const std::filesystem::path& path, const Series& series);
Series read_series(const std::filesystem::path& path);

/// Legacy structured-points volume with one CELL_DATA scalar array.
void write_volume(const std::filesystem::path& path, const std::string& name, const CellField& field,
                  Index3 dims, std::array<double, 3> spacing);

struct Volume {
    Index3 dims{0, 0, 0};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::string name;
    CellField values;
};
Volume read_volume(const std::filesystem::path& path);

} // namespace msflow
