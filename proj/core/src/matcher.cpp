#include "pecan/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pecan {

namespace {

void require_finite(std::span<const double> v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw ValueError(std::string(what) + " contains a non-finite value");
}

void require_positive_tau(double tau) {
    if (!(tau > 0.0)) throw ValueError("temperature tau must be positive, got " + std::to_string(tau));
}

} // namespace

void MatchConfig::validate() const {
    require_positive_tau(tau);
    if (total_epochs < 1) throw ValueError("total epochs E must be >= 1");
    if (epoch < 0 || epoch > total_epochs) throw ValueError("epoch e must lie in [0, E]");
}

double MatchConfig::slope() const { return sign_slope(epoch, total_epochs); }

std::size_t Assignment::argmax() const noexcept { return argmax_index(weights.data()); }

bool Assignment::one_hot() const noexcept {
    std::size_t ones = 0;
    for (double w : weights.data()) {
        if (w == 1.0) ++ones;
        else if (w != 0.0) return false;
    }
    return ones == 1;
}

Assignment softmax(std::span<const double> logits, double tau) {
    require_positive_tau(tau);
    if (logits.empty()) throw ShapeError("softmax over zero entries");
    const double top = *std::max_element(logits.begin(), logits.end());
    Tensor w(Shape{logits.size()});
    double sum = 0.0;
    for (std::size_t m = 0; m < logits.size(); ++m) {
        w[m] = std::exp((logits[m] - top) / tau);
        sum += w[m];
    }
    for (double& v : w.data()) v /= sum;
    return {std::move(w)};
}

Assignment attention_scores(const Tensor& x, const Tensor& c, double tau) {
    require_positive_tau(tau);
    if (c.rank() != 2) throw ShapeError("codebook group must be [d, p], got " + to_string(c.shape()));
    require_finite(x.data(), "attention_scores input");
    require_finite(c.data(), "attention_scores codebook");
    std::vector<double> scores(c.extent(1));
    dot_scores_into<double>(x.data(), c, scores);
    return softmax(scores, tau);
}

Tensor reconstruct(const Tensor& c, const Assignment& a) {
    if (c.rank() != 2 || c.extent(1) != a.size()) {
        throw ShapeError("reconstruct: codebook " + to_string(c.shape()) + " with assignment of size " +
                         std::to_string(a.size()));
    }
    const std::size_t d = c.extent(0), p = c.extent(1);
    Tensor out(Shape{d});
    for (std::size_t r = 0; r < d; ++r) {
        double acc = 0.0;
        for (std::size_t m = 0; m < p; ++m) acc += c[r * p + m] * a.weights[m];
        out[r] = acc;
    }
    return out;
}

Tensor l1_scores(const Tensor& x, const Tensor& c) {
    if (c.rank() != 2) throw ShapeError("codebook group must be [d, p], got " + to_string(c.shape()));
    require_finite(x.data(), "l1_scores input");
    require_finite(c.data(), "l1_scores codebook");
    Tensor out(Shape{c.extent(1)});
    l1_scores_into<double>(x.data(), c, out.data());
    return out;
}

Assignment hard_assign(std::span<const double> scores) {
    if (scores.empty()) throw ShapeError("hard_assign over zero scores");
    Tensor w(Shape{scores.size()});
    w[argmax_index(scores)] = 1.0;
    return {std::move(w)};
}

Assignment relaxed_assign(std::span<const double> scores, double tau) {
    require_positive_tau(tau);
    return softmax(scores, tau);
}

SteAssignment ste_assign(std::span<const double> scores, double tau) {
    require_positive_tau(tau);
    return {hard_assign(scores), relaxed_assign(scores, tau), tau};
}

Tensor SteAssignment::vjp(std::span<const double> upstream) const {
    return softmax_vjp(relaxed, tau, upstream);
}

Tensor softmax_vjp(const Assignment& s, double tau, std::span<const double> upstream) {
    require_positive_tau(tau);
    if (upstream.size() != s.size()) throw ShapeError("softmax_vjp: upstream gradient size mismatch");
    double mean = 0.0;
    for (std::size_t m = 0; m < s.size(); ++m) mean += s.weights[m] * upstream[m];
    Tensor g(Shape{s.size()});
    for (std::size_t m = 0; m < s.size(); ++m) g[m] = s.weights[m] * (upstream[m] - mean) / tau;
    return g;
}

double sign_slope(double epoch, double total_epochs) {
    if (!(total_epochs > 0.0)) throw ValueError("total epochs E must be positive");
    return std::exp(4.0 * epoch / total_epochs);
}

double sign_grad(double r, double epoch, double total_epochs) {
    return std::tanh(sign_slope(epoch, total_epochs) * r);
}

} // namespace pecan
