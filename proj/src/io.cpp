#include "kinlim/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace kinlim {

std::string config_hash(const json& config) {
    const std::string s = config.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json ArtifactMeta::to_json() const {
    return {{"tool", kToolName}, {"version", kToolVersion}, {"config_hash", config_hash}, {"seed", seed}};
}

std::string ArtifactMeta::csv_comment() const {
    std::ostringstream os;
    os << "# " << kToolName << " version=" << kToolVersion << " config_hash=" << config_hash << " seed=" << seed;
    return os.str();
}

void write_json(const std::string& path, const json& j) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << j.dump(2) << '\n';
    if (!os) throw std::runtime_error("failed writing " + path);
}

json read_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError("malformed JSON in " + path + ": " + e.what());
    }
}

void write_string(std::ostream& os, const std::string& s) {
    write_le(os, std::uint32_t(s.size()));
    os.write(s.data(), std::streamsize(s.size()));
}

std::string read_string(std::istream& is) {
    const auto n = read_le<std::uint32_t>(is);
    if (!is || n > (1u << 20)) return {};
    std::string s(n, '\0');
    is.read(s.data(), n);
    return s;
}

std::string format_double(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

namespace {

std::ofstream open_csv(const std::string& path, const ArtifactMeta& meta) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << meta.csv_comment() << '\n';
    return os;
}

double parse_double(const std::string& s) {
    double x = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
    if (r.ec != std::errc()) throw ConfigError("bad number in CSV: " + s);
    return x;
}

}  // namespace

void write_estimates_csv(const std::string& path, const std::vector<WignerEstimate>& est, const ArtifactMeta& meta) {
    auto os = open_csv(path, meta);
    os << "px,py,pz,n1,n2,n3,re_mean,im_mean,re_se,im_se,realizations\n";
    for (const auto& e : est) {
        os << format_double(e.obs.p[0]) << ',' << format_double(e.obs.p[1]) << ',' << format_double(e.obs.p[2])
           << ',' << e.obs.n[0] << ',' << e.obs.n[1] << ',' << e.obs.n[2] << ',' << format_double(e.mean.real())
           << ',' << format_double(e.mean.imag()) << ',' << format_double(e.stderr_.real()) << ','
           << format_double(e.stderr_.imag()) << ',' << e.realizations << '\n';
    }
}

std::vector<WignerEstimate> read_estimates_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open estimates file: " + path);
    std::vector<WignerEstimate> out;
    std::string line;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != "px,py,pz,n1,n2,n3,re_mean,im_mean,re_se,im_se,realizations")
                throw ConfigError("unexpected estimates header in " + path);
            header = true;
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 11) throw ConfigError("malformed estimates row in " + path);
        WignerEstimate e;
        for (int i = 0; i < 3; ++i) {
            e.obs.p[std::size_t(i)] = parse_double(f[std::size_t(i)]);
            e.obs.n[std::size_t(i)] = int(parse_double(f[std::size_t(3 + i)]));
        }
        e.mean = {parse_double(f[6]), parse_double(f[7])};
        e.stderr_ = {parse_double(f[8]), parse_double(f[9])};
        e.realizations = std::size_t(parse_double(f[10]));
        out.push_back(e);
    }
    return out;
}

void write_diagnostics_csv(const std::string& path, const std::vector<DiagnosticRow>& rows, const ArtifactMeta& meta) {
    auto os = open_csv(path, meta);
    os << "quantity,value,stderr,config-hash\n";
    for (const auto& r : rows)
        os << r.quantity << ',' << format_double(r.value) << ',' << format_double(r.stderr_) << ','
           << meta.config_hash << '\n';
}

void write_table_csv(const std::string& path, const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& rows, const ArtifactMeta& meta) {
    auto os = open_csv(path, meta);
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << '\n';
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << format_double(r[i]);
        os << '\n';
    }
}

namespace {
constexpr char kSnapMagic[8] = {'K', 'L', 'S', 'N', 'A', 'P', '0', '1'};
}

void save_snapshot(const std::string& path, const LatticeState& s, const ArtifactMeta& meta) {
    {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write snapshot " + path);
        os.write(kSnapMagic, 8);
        write_le(os, std::int32_t(s.L));
        write_le(os, s.epsilon);
        write_le(os, s.time);
        write_le(os, meta.seed);
        for (double x : s.q) write_le(os, x);
        for (double x : s.v) write_le(os, x);
        if (!os) throw std::runtime_error("failed writing snapshot " + path);
    }
    json side = meta.to_json();
    side["L"] = s.L;
    side["epsilon"] = s.epsilon;
    side["time"] = s.time;
    side["layout"] = "magic[8] L:int32 epsilon:f64 time:f64 seed:u64 q[L^3]:f64 v[L^3]:f64, little-endian";
    write_json(path + ".json", side);
}

LatticeState load_snapshot(const std::string& path, std::uint64_t* seed) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open snapshot " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || !std::equal(magic, magic + 8, kSnapMagic)) throw ConfigError("not a snapshot file: " + path);
    LatticeState s;
    s.L = read_le<std::int32_t>(is);
    s.epsilon = read_le<double>(is);
    s.time = read_le<double>(is);
    const auto sd = read_le<std::uint64_t>(is);
    if (seed) *seed = sd;
    if (s.L < 1 || s.L > 4096) throw ConfigError("corrupt snapshot header: " + path);
    const std::size_t n = std::size_t(s.L) * s.L * s.L;
    s.q.resize(n);
    s.v.resize(n);
    for (auto& x : s.q) x = read_le<double>(is);
    for (auto& x : s.v) x = read_le<double>(is);
    if (!is) throw ConfigError("truncated snapshot " + path);
    return s;
}

json couplings_to_json(const Couplings& c) {
    json arr = json::array();
    for (const auto& [y, a] : c.entries) arr.push_back({{"offset", {y[0], y[1], y[2]}}, {"value", a}});
    return arr;
}

Couplings couplings_from_json(const json& j) {
    if (!j.is_array()) throw ConfigError("couplings must be a list of {offset, value}");
    Couplings c;
    for (const auto& e : j) {
        if (!e.is_object()) throw ConfigError("coupling entry must be an object");
        for (const auto& [key, _] : e.items())
            if (key != "offset" && key != "value") throw ConfigError("unknown key in coupling entry: " + key);
        if (!e.contains("offset") || !e.contains("value")) throw ConfigError("coupling entry needs offset and value");
        const auto& o = e["offset"];
        if (!o.is_array() || o.size() != 3) throw ConfigError("coupling offset must be [i,j,k]");
        IVec3 y{};
        for (int i = 0; i < 3; ++i) {
            if (!o[std::size_t(i)].is_number_integer()) throw ConfigError("coupling offset entries must be integers");
            y[std::size_t(i)] = o[std::size_t(i)].get<int>();
        }
        if (!e["value"].is_number()) throw ConfigError("coupling value must be a number");
        if (c.entries.count(y)) throw ConfigError("duplicate coupling offset");
        c.entries[y] = e["value"].get<double>();
    }
    return c;
}

json estimate_to_json(const WignerEstimate& e) {
    return {{"p", {e.obs.p[0], e.obs.p[1], e.obs.p[2]}},
            {"n", {e.obs.n[0], e.obs.n[1], e.obs.n[2]}},
            {"re_mean", e.mean.real()},
            {"im_mean", e.mean.imag()},
            {"re_se", e.stderr_.real()},
            {"im_se", e.stderr_.imag()},
            {"realizations", e.realizations}};
}

}  // namespace kinlim
