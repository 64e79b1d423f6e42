#pragma once

// SBFV feature container.
//
//   bytes 0..3   magic "SBFV"
//   u32 LE       format version (1)
//   u32 LE       header length L
//   L bytes      UTF-8 JSON manifest
//   records      u32 LE id length, id bytes, then float32 LE payload
//
// A raw file ("kind": "raw") stores per record h_q (dim_prior floats), then
// K PK trace vectors and K CK trace vectors (dim_cond floats each). A fused
// file ("kind": "fused") stores one standardized input vector of
// 2 * (dim_prior + dim_cond) floats per record and carries the standardizer
// statistics in its manifest.

#include "saber/error.hpp"
#include "saber/features.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace saber {

inline constexpr std::array<char, 4> kFeatureMagic{'S', 'B', 'F', 'V'};
inline constexpr std::uint32_t kFeatureFormatVersion = 1;

struct FeatureManifest {
    std::size_t dim_prior = 0;
    std::size_t dim_cond = 0;
    std::size_t traces = 3;
    int prior_layer = -1;
    int cond_layer = -1;
    std::string backbone_tag = "synthetic";
    std::size_t count = 0;
    /// Provenance echo (generator or featurize config); opaque to readers.
    nlohmann::json meta = nlohmann::json::object();

    std::size_t input_dim() const noexcept { return 2 * (dim_prior + dim_cond); }

    void validate() const {
        if (dim_prior == 0) throw data_error("manifest: dim_prior must be positive");
        if (dim_cond == 0) throw data_error("manifest: dim_cond must be positive");
        if (traces == 0) throw data_error("manifest: traces must be positive");
    }
};

struct FeatureFile {
    FeatureManifest manifest;
    std::vector<FeatureRecord> records;
};

/// Standardized, fused model inputs keyed by instance id.
struct FusedFile {
    FeatureManifest manifest;
    Standardizer standardizer;
    std::vector<std::string> ids;
    std::vector<Vector> inputs;
};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b.data(), 4);
}

inline void put_f32(std::ostream& out, double v) {
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

inline void put_string(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class ByteReader {
public:
    explicit ByteReader(std::string bytes) : bytes_(std::move(bytes)) {}

    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    double f32() {
        const float f = std::bit_cast<float>(u32());
        if (!std::isfinite(f)) throw data_error("non-finite value in payload");
        return static_cast<double>(f);
    }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

private:
    void need(std::size_t n) const {
        if (remaining() < n) throw data_error("payload shorter than the manifest declares");
    }

    std::string bytes_;
    std::size_t pos_ = 0;
};

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline nlohmann::json manifest_json(const FeatureManifest& m, std::string_view kind) {
    nlohmann::json j;
    j["kind"] = kind;
    j["dim_prior"] = m.dim_prior;
    j["dim_cond"] = m.dim_cond;
    j["traces"] = m.traces;
    j["prior_layer"] = m.prior_layer;
    j["cond_layer"] = m.cond_layer;
    j["backbone_tag"] = m.backbone_tag;
    j["count"] = m.count;
    j["meta"] = m.meta;
    return j;
}

inline FeatureManifest manifest_from_json(const nlohmann::json& j) {
    FeatureManifest m;
    try {
        m.dim_prior = j.at("dim_prior").get<std::size_t>();
        m.dim_cond = j.at("dim_cond").get<std::size_t>();
        m.traces = j.at("traces").get<std::size_t>();
        m.prior_layer = j.at("prior_layer").get<int>();
        m.cond_layer = j.at("cond_layer").get<int>();
        m.backbone_tag = j.at("backbone_tag").get<std::string>();
        m.count = j.at("count").get<std::size_t>();
        if (j.contains("meta")) m.meta = j.at("meta");
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("malformed feature manifest: ") + e.what());
    }
    m.validate();
    return m;
}

inline void write_header(std::ostream& out, const nlohmann::json& header) {
    out.write(kFeatureMagic.data(), 4);
    put_u32(out, kFeatureFormatVersion);
    put_string(out, header.dump());
}

inline nlohmann::json read_header(ByteReader& r, const std::string& path) {
    if (r.remaining() < 4 || r.bytes(4) != std::string(kFeatureMagic.data(), 4))
        throw data_error(path + ": not an SBFV feature file");
    const auto version = r.u32();
    if (version != kFeatureFormatVersion)
        throw data_error(path + ": unsupported SBFV version " + std::to_string(version));
    const auto len = r.u32();
    try {
        return nlohmann::json::parse(r.bytes(len));
    } catch (const nlohmann::json::exception& e) {
        throw data_error(path + ": malformed header: " + e.what());
    }
}

inline void finish(std::ostream& out, const std::string& path) {
    out.flush();
    if (!out) throw data_error("write failed: " + path);
}

} // namespace detail

/// Peeks the "kind" field ("raw" or "fused") of an SBFV file.
inline std::string feature_file_kind(const std::string& path) {
    detail::ByteReader r(detail::slurp(path));
    return detail::read_header(r, path).value("kind", "raw");
}

inline void write_feature_file(const std::string& path, const FeatureFile& file) {
    FeatureManifest m = file.manifest;
    m.count = file.records.size();
    m.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot create " + path);
    detail::write_header(out, detail::manifest_json(m, "raw"));
    auto put_vec = [&](const Vector& v, std::size_t dim, const std::string& id) {
        if (v.size() != dim) throw data_error("record " + id + " does not match manifest dimensions");
        for (double e : v) detail::put_f32(out, e);
    };
    for (const auto& r : file.records) {
        if (r.traces_pk.size() != m.traces || r.traces_ck.size() != m.traces)
            throw data_error("record " + r.instance_id + " does not match manifest trace count");
        detail::put_string(out, r.instance_id);
        put_vec(r.h_q, m.dim_prior, r.instance_id);
        for (const auto& t : r.traces_pk) put_vec(t, m.dim_cond, r.instance_id);
        for (const auto& t : r.traces_ck) put_vec(t, m.dim_cond, r.instance_id);
    }
    detail::finish(out, path);
}

inline FeatureFile read_feature_file(const std::string& path) {
    detail::ByteReader r(detail::slurp(path));
    const auto header = detail::read_header(r, path);
    if (header.value("kind", "raw") != "raw") throw data_error(path + ": expected a raw feature file");
    FeatureFile file;
    file.manifest = detail::manifest_from_json(header);
    const auto& m = file.manifest;
    auto get_vec = [&](std::size_t dim) {
        Vector v(dim);
        for (double& e : v) e = r.f32();
        return v;
    };
    file.records.reserve(m.count);
    for (std::size_t i = 0; i < m.count; ++i) {
        FeatureRecord rec;
        rec.instance_id = r.bytes(r.u32());
        rec.h_q = get_vec(m.dim_prior);
        for (std::size_t k = 0; k < m.traces; ++k) rec.traces_pk.push_back(get_vec(m.dim_cond));
        for (std::size_t k = 0; k < m.traces; ++k) rec.traces_ck.push_back(get_vec(m.dim_cond));
        file.records.push_back(std::move(rec));
    }
    if (r.remaining() != 0)
        throw data_error(path + ": payload longer than the manifest declares (" +
                         std::to_string(r.remaining()) + " trailing bytes)");
    return file;
}

inline void write_fused_file(const std::string& path, const FusedFile& file) {
    FeatureManifest m = file.manifest;
    m.count = file.inputs.size();
    m.validate();
    if (file.ids.size() != file.inputs.size()) throw invariant_error("fused ids and inputs differ in length");
    const std::size_t dim = m.input_dim();
    if (file.standardizer.dim() != dim) throw invariant_error("standardizer dimension does not match inputs");
    auto header = detail::manifest_json(m, "fused");
    header["dim_input"] = dim;
    header["standardizer"] = {{"mean", file.standardizer.mean},
                              {"std", file.standardizer.std},
                              {"epsilon", file.standardizer.epsilon}};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot create " + path);
    detail::write_header(out, header);
    for (std::size_t i = 0; i < file.inputs.size(); ++i) {
        if (file.inputs[i].size() != dim) throw data_error("input " + file.ids[i] + " has wrong dimension");
        detail::put_string(out, file.ids[i]);
        for (double e : file.inputs[i]) detail::put_f32(out, e);
    }
    detail::finish(out, path);
}

inline FusedFile read_fused_file(const std::string& path) {
    detail::ByteReader r(detail::slurp(path));
    const auto header = detail::read_header(r, path);
    if (header.value("kind", "raw") != "fused") throw data_error(path + ": expected a fused feature file");
    FusedFile file;
    file.manifest = detail::manifest_from_json(header);
    const std::size_t dim = file.manifest.input_dim();
    try {
        if (header.at("dim_input").get<std::size_t>() != dim)
            throw data_error(path + ": dim_input disagrees with dim_prior/dim_cond");
        const auto& s = header.at("standardizer");
        file.standardizer.mean = s.at("mean").get<Vector>();
        file.standardizer.std = s.at("std").get<Vector>();
        file.standardizer.epsilon = s.at("epsilon").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw data_error(path + ": malformed fused header: " + e.what());
    }
    if (file.standardizer.mean.size() != dim || file.standardizer.std.size() != dim)
        throw data_error(path + ": standardizer dimension disagrees with dim_input");
    for (std::size_t i = 0; i < file.manifest.count; ++i) {
        file.ids.push_back(r.bytes(r.u32()));
        Vector v(dim);
        for (double& e : v) e = r.f32();
        file.inputs.push_back(std::move(v));
    }
    if (r.remaining() != 0)
        throw data_error(path + ": payload longer than the manifest declares (" +
                         std::to_string(r.remaining()) + " trailing bytes)");
    return file;
}

} // namespace saber
