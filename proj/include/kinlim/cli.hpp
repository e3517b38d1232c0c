#pragma once

#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "kinlim/harness.hpp"
#include "kinlim/io.hpp"

namespace kinlim {

// Strict reader over one JSON object: every key must be consumed before finish().
class ConfigReader {
public:
    ConfigReader(const json& j, std::string where);

    bool has(const std::string& key) const { return j_.contains(key); }
    const json& child(const std::string& key);

    template <class T>
    T get(const std::string& key, const T& fallback) {
        if (!j_.contains(key)) return fallback;
        return require<T>(key);
    }

    template <class T>
    T require(const std::string& key) {
        if (!j_.contains(key)) throw ConfigError(where_ + ": missing required key '" + key + "'");
        used_.insert(key);
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where_ + ": key '" + key + "' has the wrong type");
        }
    }

    Vec3 vec3(const std::string& key, const Vec3& fallback);
    IVec3 ivec3(const std::string& key, const IVec3& fallback);
    std::string path(const std::string& key) const { return where_ + "." + key; }
    void finish() const;

private:
    const json& j_;
    std::string where_;
    std::set<std::string> used_;
};

Couplings parse_couplings(const json& j, const std::string& where = "couplings");
InitialConfig parse_initial(const json& j, const std::string& where = "initial");
std::vector<Observable> parse_observables(const json& j, const std::string& where = "observables");
ConvergenceConfig parse_convergence(const json& j);

// Twelve default observables with |p| <= 2, |n| <= 2.
std::vector<Observable> default_observables();
// The desk-scale convergence study shipped as configs/default_study.json.
json default_study_json();

// Runs the CLI; returns the process exit code (0 ok, 1 validation, 2 runtime).
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

}  // namespace kinlim
