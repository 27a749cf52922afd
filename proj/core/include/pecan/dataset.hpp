#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pecan/tensor.hpp"

namespace pecan {

/**
 * Labelled samples of shape [channels, height, width]. Features are kept in
 * single precision to halve the footprint of the 60k MNIST training set;
 * batches are widened to double.
 */
class Dataset {
public:
    Dataset() = default;
    Dataset(std::size_t channels, std::size_t height, std::size_t width, std::vector<float> features,
            std::vector<int> labels);

    std::size_t size() const noexcept { return labels_.size(); }
    std::size_t channels() const noexcept { return channels_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t sample_size() const noexcept { return channels_ * height_ * width_; }

    int label(std::size_t i) const { return labels_.at(i); }
    std::span<const int> labels() const noexcept { return labels_; }
    std::span<const float> features(std::size_t i) const;

    /// Sample i as a [channels, height, width] tensor.
    Tensor sample(std::size_t i) const;
    /// Samples idx as [B, channels, height, width]; labels written to `labels`.
    Tensor batch(std::span<const std::size_t> idx, std::vector<int>& labels) const;
    /// The first n samples (all when n is 0 or exceeds the size).
    Dataset head(std::size_t n) const;

private:
    std::size_t channels_ = 0, height_ = 0, width_ = 0;
    std::vector<float> features_;
    std::vector<int> labels_;
};

/**
 * Read an IDX image file (magic 0x00000803) and its label file (0x00000801).
 * Pixels are scaled to [0, 1] by /255. Throws FormatError on a bad magic,
 * truncated payload or mismatched counts.
 */
Dataset load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Standard file names under `dir`; split is "train" or "t10k".
Dataset load_mnist_split(const std::filesystem::path& dir, const std::string& split);

/// True when all four standard MNIST files exist under `dir`.
bool mnist_available(const std::filesystem::path& dir);

} // namespace pecan
