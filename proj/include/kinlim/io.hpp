#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"
#include "kinlim/core.hpp"
#include "kinlim/dispersion.hpp"
#include "kinlim/lattice.hpp"
#include "kinlim/wigner.hpp"

namespace kinlim {

using json = nlohmann::json;

// FNV-1a 64 over the canonical (sorted-key, compact) dump, as 16 hex digits.
std::string config_hash(const json& config);

// Provenance triple carried by every artifact.
struct ArtifactMeta {
    std::string config_hash;
    std::uint64_t seed = 0;

    json to_json() const;
    std::string csv_comment() const;
};

void write_json(const std::string& path, const json& j);
json read_json(const std::string& path);

// Little-endian fixed-width binary helpers.
template <class T>
void write_le(std::ostream& os, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char b[sizeof(T)];
    std::memcpy(b, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T read_le(std::istream& is) {
    unsigned char b[sizeof(T)] = {};
    is.read(reinterpret_cast<char*>(b), sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    T value;
    std::memcpy(&value, b, sizeof(T));
    return value;
}

void write_string(std::ostream& os, const std::string& s);
std::string read_string(std::istream& is);

// Wigner-style estimate table: px,py,pz,n1,n2,n3,re_mean,im_mean,re_se,im_se,realizations
void write_estimates_csv(const std::string& path, const std::vector<WignerEstimate>& est, const ArtifactMeta& meta);
std::vector<WignerEstimate> read_estimates_csv(const std::string& path);

struct DiagnosticRow {
    std::string quantity;
    double value = 0.0;
    double stderr_ = 0.0;
};

// Columns quantity,value,stderr,config-hash.
void write_diagnostics_csv(const std::string& path, const std::vector<DiagnosticRow>& rows, const ArtifactMeta& meta);

// Generic numeric table with a mandatory header row.
void write_table_csv(const std::string& path, const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& rows, const ArtifactMeta& meta);

// Binary state container (header L, eps, time, seed; payload q then v) plus a JSON sidecar.
void save_snapshot(const std::string& path, const LatticeState& s, const ArtifactMeta& meta);
LatticeState load_snapshot(const std::string& path, std::uint64_t* seed = nullptr);

json couplings_to_json(const Couplings& c);
// Accepts a list of {offset:[i,j,k], value:x}; throws ConfigError on malformed input.
Couplings couplings_from_json(const json& j);

json estimate_to_json(const WignerEstimate& e);

// Shortest round-trip decimal form, locale independent.
std::string format_double(double x);

}  // namespace kinlim
