#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pecan/lut.hpp"
#include "pecan/model.hpp"
#include "pecan/network.hpp"
#include "pecan/tensor.hpp"

namespace pecan {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// A named float32 array with its shape.
struct Blob {
    std::string name;
    Shape shape;
    std::vector<float> data;

    bool operator==(const Blob&) const = default;
};

/**
 * Persisted model. The manifest (format version, spec, seed, epoch,
 * calibration flag) is stored as JSON text; parameters follow as blobs named
 * "<layer>.weight", "<layer>.bias", "<layer>.codebook.<j>" ([d, p_j]) and,
 * optionally, "<layer>.lut.<j>" ([c_out, p_j]).
 */
struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    NetworkSpec spec;
    std::uint64_t seed = 0;
    int epoch = 0;
    bool calibrated = false;
    std::vector<Blob> blobs;

    const Blob* find(const std::string& name) const noexcept;
    bool operator==(const Checkpoint&) const = default;
};

/// Blob from a tensor; doubles round to nearest float32.
Blob to_blob(std::string name, const Tensor& t);
Tensor from_blob(const Blob& b);

Checkpoint to_checkpoint(const Model& model, bool include_luts = false);
/// Rebuild a model; throws FormatError when blobs are missing or mis-shaped.
Model to_model(const Checkpoint& ck);

/// Serialized bytes of a checkpoint.
std::vector<unsigned char> encode_checkpoint(const Checkpoint& ck);
/// Parse bytes; FormatError on bad magic, version mismatch, truncation or inconsistent shapes.
Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes);

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Manifest text of a checkpoint (JSON).
std::string manifest_json(const Checkpoint& ck);

/// Blobs "<layer>.lut.<j>" for every PECAN layer of the model.
std::vector<Blob> lut_blobs(const Model& model);

} // namespace pecan
