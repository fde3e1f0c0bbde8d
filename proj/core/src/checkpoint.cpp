#include "hdt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace hdt {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double d) {
    std::uint64_t v = std::bit_cast<std::uint64_t>(d);
    put_u64(os, v);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

constexpr char kMagic[8] = {'H', 'D', 'T', 'C', 'K', 'P', 'T', '1'};

}  // namespace

void Checkpoint::add(const std::string& name, Shape shape, std::vector<double> data) {
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
        throw DimensionError("checkpoint: entry '" + name + "' data does not match shape " +
                             shape_str(shape));
    }
    for (const auto& e : entries_) {
        if (e.name == name) throw ConfigurationError("checkpoint: duplicate entry '" + name + "'");
    }
    entries_.push_back({name, std::move(shape), std::move(data)});
}

void Checkpoint::add_scalar(const std::string& name, double value) { add(name, {1}, {value}); }

void Checkpoint::add_params(const ParamGroup& params, const std::string& prefix) {
    for (const auto& p : params.all()) {
        add(prefix + p.name, p.value.shape(),
            std::vector<double>(p.value.data().begin(), p.value.data().end()));
    }
}

bool Checkpoint::contains(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return true;
    }
    return false;
}

const Checkpoint::Entry& Checkpoint::require(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return e;
    }
    throw ConfigurationError("checkpoint: missing entry '" + name + "'");
}

double Checkpoint::scalar(const std::string& name) const {
    const Entry& e = require(name);
    if (e.data.size() != 1) throw ConfigurationError("checkpoint: entry '" + name + "' is not scalar");
    return e.data[0];
}

void Checkpoint::load_into(ParamGroup& params, const std::string& prefix) const {
    for (auto& p : params.all()) {
        const Entry& e = require(prefix + p.name);
        if (e.shape != p.value.shape()) {
            throw ConfigurationError("checkpoint: shape of '" + p.name + "' is " +
                                     shape_str(e.shape) + ", model expects " +
                                     shape_str(p.value.shape()));
        }
        std::copy(e.data.begin(), e.data.end(), p.value.mutable_data().begin());
    }
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw StateError("checkpoint: cannot open '" + path + "' for writing");
    os.write(kMagic, 8);
    put_u32(os, kFormatVersion);

    nlohmann::json hdr;
    hdr["format_version"] = kFormatVersion;
    hdr["seed"] = seed;
    hdr["strings"] = header_strings;
    hdr["numbers"] = header_numbers;
    const std::string hs = hdr.dump();
    put_u64(os, hs.size());
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));

    put_u64(os, entries_.size());
    for (const auto& e : entries_) {
        put_u32(os, static_cast<std::uint32_t>(e.name.size()));
        os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        put_u32(os, static_cast<std::uint32_t>(e.shape.size()));
        for (auto d : e.shape) put_u64(os, static_cast<std::uint64_t>(d));
        for (double v : e.data) put_f64(os, v);
    }
    if (!os) throw StateError("checkpoint: write to '" + path + "' failed");
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw StateError("checkpoint: cannot open '" + path + "'");
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) {
        throw ConfigurationError("checkpoint: '" + path + "' is not a checkpoint file");
    }
    const std::uint32_t version = get_u32(is);
    if (version != kFormatVersion) {
        throw ConfigurationError("checkpoint: unsupported format version " + std::to_string(version));
    }

    Checkpoint ck;
    const std::uint64_t hlen = get_u64(is);
    std::string hs(hlen, '\0');
    is.read(hs.data(), static_cast<std::streamsize>(hlen));
    nlohmann::json hdr = nlohmann::json::parse(hs);
    ck.seed = hdr.value("seed", std::uint64_t{0});
    if (hdr.contains("strings")) ck.header_strings = hdr["strings"].get<std::map<std::string, std::string>>();
    if (hdr.contains("numbers")) ck.header_numbers = hdr["numbers"].get<std::map<std::string, double>>();

    const std::uint64_t count = get_u64(is);
    for (std::uint64_t i = 0; i < count; ++i) {
        Entry e;
        const std::uint32_t nlen = get_u32(is);
        e.name.resize(nlen);
        is.read(e.name.data(), nlen);
        const std::uint32_t rank = get_u32(is);
        e.shape.resize(rank);
        for (std::uint32_t r = 0; r < rank; ++r) e.shape[r] = static_cast<std::int64_t>(get_u64(is));
        e.data.resize(static_cast<std::size_t>(shape_numel(e.shape)));
        for (double& v : e.data) v = get_f64(is);
        if (!is) throw IngestionError("checkpoint: truncated file '" + path + "'");
        ck.entries_.push_back(std::move(e));
    }
    return ck;
}

}  // namespace hdt
