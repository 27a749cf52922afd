#include <fstream>
#include <iterator>

#include "pecan/dataset.hpp"

namespace pecan {

Dataset::Dataset(std::size_t channels, std::size_t height, std::size_t width, std::vector<float> features,
                 std::vector<int> labels)
    : channels_(channels), height_(height), width_(width), features_(std::move(features)), labels_(std::move(labels)) {
    if (channels_ == 0 || height_ == 0 || width_ == 0) throw ShapeError("dataset sample extents must be positive");
    if (features_.size() != labels_.size() * sample_size()) {
        throw ShapeError("dataset holds " + std::to_string(features_.size()) + " feature values for " +
                         std::to_string(labels_.size()) + " samples of " + std::to_string(sample_size()));
    }
}

std::span<const float> Dataset::features(std::size_t i) const {
    if (i >= size()) throw ShapeError("sample index " + std::to_string(i) + " out of range");
    return std::span<const float>(features_).subspan(i * sample_size(), sample_size());
}

Tensor Dataset::sample(std::size_t i) const {
    const auto f = features(i);
    return Tensor(Shape{channels_, height_, width_}, std::vector<double>(f.begin(), f.end()));
}

Tensor Dataset::batch(std::span<const std::size_t> idx, std::vector<int>& labels) const {
    if (idx.empty()) throw ShapeError("empty batch");
    Tensor out(Shape{idx.size(), channels_, height_, width_});
    labels.resize(idx.size());
    const std::size_t s = sample_size();
    for (std::size_t b = 0; b < idx.size(); ++b) {
        const auto f = features(idx[b]);
        std::copy(f.begin(), f.end(), out.raw() + b * s);
        labels[b] = labels_[idx[b]];
    }
    return out;
}

Dataset Dataset::head(std::size_t n) const {
    if (n == 0 || n >= size()) return *this;
    std::vector<float> f(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(n * sample_size()));
    std::vector<int> l(labels_.begin(), labels_.begin() + static_cast<std::ptrdiff_t>(n));
    return Dataset(channels_, height_, width_, std::move(f), std::move(l));
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t at) {
    return (std::uint32_t(b[at]) << 24) | (std::uint32_t(b[at + 1]) << 16) | (std::uint32_t(b[at + 2]) << 8) |
           std::uint32_t(b[at + 3]);
}

} // namespace

Dataset load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels) {
    const auto img = read_file(images);
    const auto lab = read_file(labels);
    if (img.size() < 16) throw FormatError("'" + images.string() + "': truncated IDX header");
    if (lab.size() < 8) throw FormatError("'" + labels.string() + "': truncated IDX header");
    if (be32(img, 0) != 0x00000803u) throw FormatError("'" + images.string() + "': bad magic, expected 0x00000803");
    if (be32(lab, 0) != 0x00000801u) throw FormatError("'" + labels.string() + "': bad magic, expected 0x00000801");
    const std::size_t n = be32(img, 4), rows = be32(img, 8), cols = be32(img, 12);
    const std::size_t nl = be32(lab, 4);
    if (rows == 0 || cols == 0) throw FormatError("'" + images.string() + "': zero image extent");
    if (img.size() - 16 < n * rows * cols) throw FormatError("'" + images.string() + "': truncated pixel data");
    if (lab.size() - 8 < nl) throw FormatError("'" + labels.string() + "': truncated label data");
    if (n != nl) {
        throw FormatError("image file holds " + std::to_string(n) + " items but label file holds " +
                          std::to_string(nl));
    }
    std::vector<float> features(n * rows * cols);
    for (std::size_t e = 0; e < features.size(); ++e) features[e] = static_cast<float>(img[16 + e] / 255.0);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = lab[8 + i];
        if (y[i] > 9) throw FormatError("'" + labels.string() + "': label " + std::to_string(y[i]) + " outside 0..9");
    }
    return Dataset(1, rows, cols, std::move(features), std::move(y));
}

Dataset load_mnist_split(const std::filesystem::path& dir, const std::string& split) {
    if (split != "train" && split != "t10k") throw ValueError("MNIST split must be 'train' or 't10k'");
    return load_mnist(dir / (split + "-images-idx3-ubyte"), dir / (split + "-labels-idx1-ubyte"));
}

bool mnist_available(const std::filesystem::path& dir) {
    for (const char* f : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte",
                          "t10k-labels-idx1-ubyte"}) {
        std::error_code ec;
        if (!std::filesystem::is_regular_file(dir / f, ec)) return false;
    }
    return true;
}

} // namespace pecan
