#pragma once

// Knowledge-base snapshot container:
//
//   magic      8 bytes   "EHLKBSNP"
//   version    u32 LE    kKbFormatVersion
//   hdr_len    u32 LE    byte length of the JSON header
//   header     hdr_len   UTF-8 JSON: format, version, dim, latent_dim, eta,
//                        tasks_seen, lineage
//   payload    f64 LE    G (dim x Z), X (Z x Z), Y (dim x Z), encoding mean (Z),
//                        each matrix row-major
//   checksum   u64 LE    FNV-1a 64 over every preceding byte

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ehl/lifelong.hpp"
#include "ehl/rng.hpp"

namespace ehl::harness {

inline constexpr std::uint32_t kKbFormatVersion = 1;
inline constexpr std::string_view kKbMagic = "EHLKBSNP";

struct KbFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct KbSchemaError : KbFormatError {
    using KbFormatError::KbFormatError;
};
struct KbVersionError : KbFormatError {
    using KbFormatError::KbFormatError;
};

/// Where a snapshot came from.
struct KbLineage {
    std::uint64_t master_seed = 0;
    std::vector<int> trained_task_ids;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint64_t get_le(std::string_view bytes, std::size_t pos, int width) {
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    }
    return v;
}

inline void put_matrix(std::string& out, const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) put_u64(out, std::bit_cast<std::uint64_t>(m(r, c)));
    }
}

inline Eigen::MatrixXd get_matrix(std::string_view bytes, std::size_t& pos, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = std::bit_cast<double>(get_le(bytes, pos, 8));
            pos += 8;
        }
    }
    return m;
}

} // namespace detail

inline std::string serialize_kb(const KnowledgeBase& kb, const KbLineage& lineage = {}) {
    nlohmann::ordered_json header;
    header["format"] = "ehl-knowledge-base";
    header["version"] = kKbFormatVersion;
    header["dim"] = kb.dim();
    header["latent_dim"] = kb.latent_dim();
    header["eta"] = kb.eta;
    header["tasks_seen"] = kb.tasks_seen;
    header["lineage"] = {{"master_seed", lineage.master_seed}, {"trained_task_ids", lineage.trained_task_ids}};
    const std::string header_text = header.dump();

    std::string out(kKbMagic);
    detail::put_u32(out, kKbFormatVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(header_text.size()));
    out += header_text;
    detail::put_matrix(out, kb.basis);
    detail::put_matrix(out, kb.code_moment);
    detail::put_matrix(out, kb.cross_moment);
    detail::put_matrix(out, kb.encoding_mean.transpose());
    detail::put_u64(out, ehl::detail::fnv1a64(out));
    return out;
}

/// Content hash of a knowledge base (lineage excluded).
inline std::uint64_t kb_hash(const KnowledgeBase& kb) {
    return ehl::detail::fnv1a64(serialize_kb(kb));
}

/// Parses a snapshot. Nothing is returned unless every check passes.
inline KnowledgeBase deserialize_kb(std::string_view bytes, KbLineage* lineage = nullptr) {
    constexpr std::size_t kFixed = 8 + 4 + 4;
    if (bytes.size() < kFixed + 8 || bytes.substr(0, 8) != kKbMagic) {
        throw KbSchemaError("knowledge base: not a snapshot file (bad magic or truncated)");
    }
    const auto version = static_cast<std::uint32_t>(detail::get_le(bytes, 8, 4));
    if (version != kKbFormatVersion) {
        throw KbVersionError("knowledge base: format version " + std::to_string(version) + ", expected " +
                             std::to_string(kKbFormatVersion));
    }
    const auto stored_sum = detail::get_le(bytes, bytes.size() - 8, 8);
    if (ehl::detail::fnv1a64(bytes.substr(0, bytes.size() - 8)) != stored_sum) {
        throw KbSchemaError("knowledge base: checksum mismatch");
    }
    const auto header_len = static_cast<std::size_t>(detail::get_le(bytes, 12, 4));
    if (kFixed + header_len + 8 > bytes.size()) {
        throw KbSchemaError("knowledge base: header length exceeds file size");
    }

    nlohmann::json header;
    Eigen::Index dim = 0, z = 0;
    KnowledgeBase kb;
    try {
        header = nlohmann::json::parse(bytes.substr(kFixed, header_len));
        if (header.at("format").get<std::string>() != "ehl-knowledge-base") {
            throw KbSchemaError("knowledge base: unknown format tag");
        }
        if (header.at("version").get<std::uint32_t>() != kKbFormatVersion) {
            throw KbVersionError("knowledge base: header version disagrees with container version");
        }
        dim = header.at("dim").get<Eigen::Index>();
        z = header.at("latent_dim").get<Eigen::Index>();
        kb.eta = header.at("eta").get<double>();
        kb.tasks_seen = header.at("tasks_seen").get<std::size_t>();
    } catch (const KbFormatError&) {
        throw;
    } catch (const std::exception& e) {
        throw KbSchemaError(std::string("knowledge base: malformed header: ") + e.what());
    }
    if (dim < 1 || z < 1) {
        throw KbSchemaError("knowledge base: non-positive shape");
    }
    const std::size_t payload = 8 * static_cast<std::size_t>(dim * z + z * z + dim * z + z);
    if (kFixed + header_len + payload + 8 != bytes.size()) {
        throw KbSchemaError("knowledge base: payload size does not match the declared shapes");
    }

    std::size_t pos = kFixed + header_len;
    kb.basis = detail::get_matrix(bytes, pos, dim, z);
    kb.code_moment = detail::get_matrix(bytes, pos, z, z);
    kb.cross_moment = detail::get_matrix(bytes, pos, dim, z);
    kb.encoding_mean = detail::get_matrix(bytes, pos, 1, z).transpose();

    if (lineage) {
        try {
            lineage->master_seed = header.at("lineage").at("master_seed").get<std::uint64_t>();
            lineage->trained_task_ids = header.at("lineage").at("trained_task_ids").get<std::vector<int>>();
        } catch (const std::exception& e) {
            throw KbSchemaError(std::string("knowledge base: malformed lineage: ") + e.what());
        }
    }
    return kb;
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
inline void write_atomic(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!os) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path, const KbLineage& lineage = {}) {
    write_atomic(path, serialize_kb(kb, lineage));
}

inline KnowledgeBase load_kb(const std::filesystem::path& path, KbLineage* lineage = nullptr) {
    return deserialize_kb(read_file(path), lineage);
}

} // namespace ehl::harness
