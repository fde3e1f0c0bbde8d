#pragma once

#include <map>
#include <string>
#include <vector>

#include "hdt/nn.hpp"
#include "hdt/tensor.hpp"

namespace hdt {

// Flat binary container: a JSON header (format version, hyperparameters,
// seed, anything run-scoped) plus named float64 buffers, all little-endian.
// Round-trips are bit-exact.
class Checkpoint {
public:
    struct Entry {
        std::string name;
        Shape shape;
        std::vector<double> data;
    };

    static constexpr std::uint32_t kFormatVersion = 1;

    std::map<std::string, std::string> header_strings;
    std::map<std::string, double> header_numbers;
    std::uint64_t seed = 0;

    void add(const std::string& name, Shape shape, std::vector<double> data);
    void add_scalar(const std::string& name, double value);
    void add_params(const ParamGroup& params, const std::string& prefix = "");

    bool contains(const std::string& name) const;
    const Entry& require(const std::string& name) const;
    double scalar(const std::string& name) const;
    const std::vector<Entry>& entries() const { return entries_; }

    // Restores values into an existing parameter group; every parameter must
    // be present with an identical shape.
    void load_into(ParamGroup& params, const std::string& prefix = "") const;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

private:
    std::vector<Entry> entries_;
};

}  // namespace hdt
