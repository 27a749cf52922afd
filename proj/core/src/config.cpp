#include "pecan/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "pecan/error.hpp"

namespace pecan {

namespace {

struct Setting {
    std::string key;
    std::string value;
    int line = 0;
};

[[noreturn]] void fail(int line, const std::string& msg) {
    throw ConfigError(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg);
}

std::vector<Setting> tokenize(std::string_view text) {
    std::vector<Setting> out;
    int line = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view row = text.substr(start, end - start);
        ++line;
        if (const auto hash = row.find('#'); hash != std::string_view::npos) row = row.substr(0, hash);
        std::istringstream words{std::string(row)};
        std::string tok;
        while (words >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos || eq == 0 || eq + 1 == tok.size()) {
                fail(line, "expected key=value, got '" + tok + "'");
            }
            out.push_back({tok.substr(0, eq), tok.substr(eq + 1), line});
        }
        if (end == text.size()) break;
        start = end + 1;
    }
    return out;
}

std::size_t to_count(const Setting& a) {
    std::size_t v = 0;
    const char* first = a.value.data();
    const char* last = first + a.value.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) fail(a.line, "'" + a.key + "' expects a nonnegative integer, got '" + a.value + "'");
    return v;
}

int to_int(const Setting& a) {
    const std::size_t v = to_count(a);
    if (v > 1'000'000'000) fail(a.line, "'" + a.key + "' is out of range");
    return static_cast<int>(v);
}

double to_real(const Setting& a) {
    double v = 0.0;
    const char* first = a.value.data();
    const char* last = first + a.value.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
        fail(a.line, "'" + a.key + "' expects a real number, got '" + a.value + "'");
    }
    return v;
}

void require(bool ok, const Setting& a, const std::string& what) {
    if (!ok) fail(a.line, "'" + a.key + "' " + what + ", got " + a.value);
}

std::string real_text(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

// Lines of the settings that shaped each layer's PECAN parameters.
struct LayerLines {
    int p = 0, groups = 0, dim = 0, tau = 0, method = 0;
};

void set_reference(LayerSpec& l, const std::string& arch, Method method, double tau_a, double tau_d) {
    l.method = method;
    if (method == Method::baseline) {
        l.p = l.groups = l.dim = 0;
        l.tau = 1.0;
        return;
    }
    l.tau = method == Method::pecan_a ? tau_a : tau_d;
    if (auto s = reference_setting(arch, l.name, method)) {
        l.p = s->p;
        l.groups = s->groups;
        l.dim = s->dim;
    } else {
        l.groups = l.c_in;
        l.dim = l.k * l.k;
        l.p = method == Method::pecan_a ? 8 : 64;
    }
}

} // namespace

RunConfig parse_config(std::string_view text) {
    const std::vector<Setting> all = tokenize(text);
    RunConfig cfg;
    TrainConfig& t = cfg.train;

    std::string arch = "lenet5";
    int arch_line = 0;
    for (const Setting& a : all) {
        if (a.key == "arch") {
            arch = a.value;
            arch_line = a.line;
        }
    }
    try {
        cfg.spec = builtin_network(arch, Method::baseline);
    } catch (const Error& e) {
        fail(arch_line, e.what());
    }

    std::vector<const Setting*> globals_pecan, per_layer;
    for (const Setting& a : all) {
        const std::string& k = a.key;
        if (k == "arch") continue;
        if (k.find('.') != std::string::npos) {
            per_layer.push_back(&a);
        } else if (k == "method") {
            const auto m = parse_method(a.value);
            if (!m) fail(a.line, "unknown method '" + a.value + "' (baseline, pecan_a, pecan_d)");
            cfg.method = *m;
        } else if (k == "strategy") {
            const auto s = parse_strategy(a.value);
            if (!s) fail(a.line, "unknown strategy '" + a.value + "' (from_scratch, freeze_weights)");
            t.strategy = *s;
        } else if (k == "epochs") {
            t.epochs = to_int(a);
        } else if (k == "batch_size") {
            t.batch_size = to_count(a);
            require(t.batch_size > 0, a, "must be positive");
        } else if (k == "lr") {
            t.learning_rate = to_real(a);
            require(t.learning_rate > 0, a, "must be positive");
        } else if (k == "lr_decay_epochs") {
            t.lr_decay_epochs = to_int(a);
            require(t.lr_decay_epochs > 0, a, "must be positive");
        } else if (k == "lr_decay_factor") {
            t.lr_decay_factor = to_real(a);
            require(t.lr_decay_factor > 0 && t.lr_decay_factor <= 1, a, "must lie in (0, 1]");
        } else if (k == "tau_a") {
            t.tau_a = to_real(a);
            require(t.tau_a > 0, a, "must be positive");
        } else if (k == "tau_d") {
            t.tau_d = to_real(a);
            require(t.tau_d > 0, a, "must be positive");
        } else if (k == "beta1") {
            t.beta1 = to_real(a);
            require(t.beta1 > 0 && t.beta1 < 1, a, "must lie in (0, 1)");
        } else if (k == "beta2") {
            t.beta2 = to_real(a);
            require(t.beta2 > 0 && t.beta2 < 1, a, "must lie in (0, 1)");
        } else if (k == "adam_eps") {
            t.adam_eps = to_real(a);
            require(t.adam_eps > 0, a, "must be positive");
        } else if (k == "seed") {
            t.seed = to_count(a);
        } else if (k == "kmeans_iters") {
            t.kmeans_iters = to_count(a);
            require(t.kmeans_iters > 0, a, "must be positive");
        } else if (k == "calib_images") {
            t.calib_images = to_count(a);
            require(t.calib_images > 0, a, "must be positive");
        } else if (k == "kmeans_columns") {
            t.kmeans_columns = to_count(a);
            require(t.kmeans_columns > 0, a, "must be positive");
        } else if (k == "angle_fit_steps") {
            t.angle_fit_steps = to_count(a);
        } else if (k == "angle_fit_columns") {
            t.angle_fit_columns = to_count(a);
            require(t.angle_fit_columns > 0, a, "must be positive");
        } else if (k == "train_subset") {
            t.train_subset = to_count(a);
        } else if (k == "test_subset") {
            t.test_subset = to_count(a);
        } else if (k == "eval_every") {
            t.eval_every = to_int(a);
        } else if (k == "p" || k == "D" || k == "d" || k == "tau") {
            globals_pecan.push_back(&a);
        } else {
            fail(a.line, "unknown key '" + k + "'");
        }
    }

    NetworkSpec& spec = cfg.spec;
    std::map<std::string, LayerLines> lines;
    for (LayerSpec& l : spec.layers)
        if (l.parameterized()) set_reference(l, spec.arch, cfg.method, t.tau_a, t.tau_d);

    auto apply = [&](LayerSpec& l, const Setting& a, const std::string& field) {
        LayerLines& ln = lines[l.name];
        if (field == "p") {
            l.p = to_count(a);
            ln.p = a.line;
        } else if (field == "D") {
            l.groups = to_count(a);
            ln.groups = a.line;
        } else if (field == "d") {
            l.dim = to_count(a);
            ln.dim = a.line;
        } else if (field == "tau") {
            l.tau = to_real(a);
            ln.tau = a.line;
        }
    };

    for (const Setting* a : globals_pecan)
        for (LayerSpec& l : spec.layers)
            if (l.pecan()) apply(l, *a, a->key);

    // Per-layer method switches first so that later p/D/d/tau overrides stick.
    auto split = [](const Setting& a) {
        const auto dot = a.key.find('.');
        return std::pair{a.key.substr(0, dot), a.key.substr(dot + 1)};
    };
    for (const Setting* a : per_layer) {
        const auto [layer, field] = split(*a);
        LayerSpec* l = spec.find(layer);
        if (!l || !l->parameterized()) fail(a->line, "unknown layer '" + layer + "' in key '" + a->key + "'");
        if (field != "method" && field != "p" && field != "D" && field != "d" && field != "tau") {
            fail(a->line, "unknown key '" + a->key + "'");
        }
        if (field == "method") {
            const auto m = parse_method(a->value);
            if (!m) fail(a->line, "unknown method '" + a->value + "'");
            set_reference(*l, spec.arch, *m, t.tau_a, t.tau_d);
            lines[l->name] = LayerLines{};
            lines[l->name].method = a->line;
        }
    }
    for (const Setting* a : per_layer) {
        const auto [layer, field] = split(*a);
        if (field == "method") continue;
        LayerSpec* l = spec.find(layer);
        if (!l->pecan()) fail(a->line, "layer '" + layer + "' is not a PECAN layer, '" + field + "' does not apply");
        apply(*l, *a, field);
    }

    for (LayerSpec& l : spec.layers) {
        if (!l.pecan()) continue;
        const LayerLines& ln = lines[l.name];
        if (l.p == 0) fail(ln.p, "layer '" + l.name + "': p must be >= 1");
        if (!(l.tau > 0.0)) fail(ln.tau, "layer '" + l.name + "': tau must be positive");
        if (l.groups == 0 || l.dim == 0 || l.groups * l.dim != l.fan_in()) {
            fail(std::max({ln.groups, ln.dim, ln.method}),
                 "layer '" + l.name + "': D*d = " + std::to_string(l.groups) + "*" + std::to_string(l.dim) +
                     " does not equal c_in*k^2 = " + std::to_string(l.fan_in()));
        }
    }
    try {
        spec.resolve();
        t.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string serialize_config(const RunConfig& cfg) {
    const TrainConfig& t = cfg.train;
    std::ostringstream os;
    os << "arch=" << cfg.spec.arch << '\n'
       << "method=" << to_string(cfg.method) << '\n'
       << "strategy=" << to_string(t.strategy) << '\n'
       << "epochs=" << t.epochs << '\n'
       << "batch_size=" << t.batch_size << '\n'
       << "lr=" << real_text(t.learning_rate) << '\n'
       << "lr_decay_epochs=" << t.lr_decay_epochs << '\n'
       << "lr_decay_factor=" << real_text(t.lr_decay_factor) << '\n'
       << "tau_a=" << real_text(t.tau_a) << '\n'
       << "tau_d=" << real_text(t.tau_d) << '\n'
       << "beta1=" << real_text(t.beta1) << '\n'
       << "beta2=" << real_text(t.beta2) << '\n'
       << "adam_eps=" << real_text(t.adam_eps) << '\n'
       << "seed=" << t.seed << '\n'
       << "kmeans_iters=" << t.kmeans_iters << '\n'
       << "calib_images=" << t.calib_images << '\n'
       << "kmeans_columns=" << t.kmeans_columns << '\n'
       << "angle_fit_steps=" << t.angle_fit_steps << '\n'
       << "angle_fit_columns=" << t.angle_fit_columns << '\n'
       << "train_subset=" << t.train_subset << '\n'
       << "test_subset=" << t.test_subset << '\n'
       << "eval_every=" << t.eval_every << '\n';
    for (const LayerSpec& l : cfg.spec.layers) {
        if (!l.parameterized()) continue;
        if (l.method != cfg.method) os << l.name << ".method=" << to_string(l.method) << '\n';
        if (l.pecan()) {
            os << l.name << ".p=" << l.p << ' ' << l.name << ".D=" << l.groups << ' ' << l.name << ".d=" << l.dim << ' '
               << l.name << ".tau=" << real_text(l.tau) << '\n';
        }
    }
    return os.str();
}

} // namespace pecan
