#include "robustkd/tinynet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <set>

#include "robustkd/data.hpp"

namespace rkd {

namespace {

bool word_byte(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (word_byte(c)) {
            cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c + 32) : static_cast<char>(c));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

double token_overlap(std::string_view premise, std::string_view hypothesis) {
    auto p = tokenize(premise);
    auto h = tokenize(hypothesis);
    std::set<std::string> ps(p.begin(), p.end());
    std::set<std::string> hs(h.begin(), h.end());
    if (hs.empty()) return 0.0;
    std::size_t shared = 0;
    for (const auto& t : hs) shared += ps.count(t);
    return static_cast<double>(shared) / static_cast<double>(hs.size());
}

std::uint32_t bucket_of(std::string_view feature, std::size_t dim) {
    return static_cast<std::uint32_t>(fnv1a64(feature) % dim);
}

FeatureVector encode(std::string_view premise, std::string_view hypothesis, std::size_t dim) {
    if (dim < 2) throw ContractError("feature dimension must be at least 2");
    FeatureVector fv;
    fv.dim = dim;
    std::vector<std::uint32_t> buckets;
    for (const auto& t : tokenize(premise)) buckets.push_back(bucket_of("p:" + t, dim));
    for (const auto& t : tokenize(hypothesis)) buckets.push_back(bucket_of("h:" + t, dim));
    std::sort(buckets.begin(), buckets.end());
    for (auto b : buckets) {
        if (!fv.entries.empty() && fv.entries.back().first == b) fv.entries.back().second += 1.0;
        else fv.entries.emplace_back(b, 1.0);
    }
    fv.overlap = token_overlap(premise, hypothesis);
    return fv;
}

bool ModelParams::all_finite() const {
    auto ok = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    return ok(w1) && ok(b1) && ok(w2) && ok(b2);
}

ModelParams ModelParams::zeros(std::size_t dim, std::size_t hidden, std::size_t classes) {
    if (dim < 2 || hidden == 0 || classes == 0) throw ContractError("invalid model shape");
    ModelParams p;
    p.dim = dim;
    p.hidden = hidden;
    p.classes = classes;
    p.w1.assign((dim + 1) * hidden, 0.0);
    p.b1.assign(hidden, 0.0);
    p.w2.assign(classes * hidden, 0.0);
    p.b2.assign(classes, 0.0);
    return p;
}

ModelParams ModelParams::init(std::size_t dim, std::size_t hidden, std::size_t classes,
                              std::uint64_t seed) {
    ModelParams p = zeros(dim, hidden, classes);
    p.seed = seed;
    Rng rng(seed);
    const double a1 = std::sqrt(6.0 / static_cast<double>(dim + 1));
    const double a2 = std::sqrt(6.0 / static_cast<double>(hidden));
    // Draw W1 in row-major order so the stream does not depend on storage layout.
    for (std::size_t h = 0; h < hidden; ++h)
        for (std::size_t col = 0; col <= dim; ++col) p.w1_at(h, col) = rng.uniform(-a1, a1);
    for (auto& w : p.w2) w = rng.uniform(-a2, a2);
    return p;
}

Gradient Gradient::zeros_like(const ModelParams& p) {
    Gradient g;
    g.hidden = p.hidden;
    g.b1.assign(p.hidden, 0.0);
    g.w2.assign(p.classes * p.hidden, 0.0);
    g.b2.assign(p.classes, 0.0);
    return g;
}

double* Gradient::column(std::uint32_t col) {
    auto [it, inserted] = slot_.try_emplace(col, cols.size());
    if (inserted) {
        cols.push_back(col);
        w1_cols.resize(w1_cols.size() + hidden, 0.0);
    }
    return w1_cols.data() + it->second * hidden;
}

void Gradient::add(const Gradient& other, double s) {
    if (other.hidden != hidden || other.b2.size() != b2.size())
        throw ContractError("gradient shape mismatch");
    for (std::size_t k = 0; k < other.cols.size(); ++k) {
        double* dst = column(other.cols[k]);
        const double* src = other.w1_cols.data() + k * hidden;
        for (std::size_t h = 0; h < hidden; ++h) dst[h] += s * src[h];
    }
    for (std::size_t i = 0; i < b1.size(); ++i) b1[i] += s * other.b1[i];
    for (std::size_t i = 0; i < w2.size(); ++i) w2[i] += s * other.w2[i];
    for (std::size_t i = 0; i < b2.size(); ++i) b2[i] += s * other.b2[i];
}

void Gradient::scale(double s) {
    for (auto* v : {&w1_cols, &b1, &w2, &b2})
        for (auto& x : *v) x *= s;
}

double Gradient::w1_at(std::size_t h, std::size_t col) const {
    auto it = slot_.find(static_cast<std::uint32_t>(col));
    if (it == slot_.end()) return 0.0;
    return w1_cols[it->second * hidden + h];
}

bool Gradient::all_finite() const {
    for (const auto* v : {&w1_cols, &b1, &w2, &b2})
        for (double x : *v)
            if (!std::isfinite(x)) return false;
    return true;
}

void forward(const ModelParams& params, const FeatureVector& x, Activations& act) {
    if (x.dim != params.dim) throw ContractError("feature dimension does not match model input");
    const std::size_t H = params.hidden, C = params.classes;
    act.pre.assign(params.b1.begin(), params.b1.end());
    for (const auto& [col, v] : x.entries) {
        const double* w = params.w1.data() + static_cast<std::size_t>(col) * H;
        for (std::size_t h = 0; h < H; ++h) act.pre[h] += w[h] * v;
    }
    if (x.overlap != 0.0) {
        const double* w = params.w1.data() + params.dim * H;
        for (std::size_t h = 0; h < H; ++h) act.pre[h] += w[h] * x.overlap;
    }
    act.hidden.resize(H);
    for (std::size_t h = 0; h < H; ++h) act.hidden[h] = act.pre[h] > 0.0 ? act.pre[h] : 0.0;
    act.logits.assign(params.b2.begin(), params.b2.end());
    for (std::size_t c = 0; c < C; ++c) {
        const double* w = params.w2.data() + c * H;
        double z = 0.0;
        for (std::size_t h = 0; h < H; ++h) z += w[h] * act.hidden[h];
        act.logits[c] += z;
    }
    const double mx = *std::max_element(act.logits.begin(), act.logits.end());
    act.probs.resize(C);
    double sum = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
        act.probs[c] = std::exp(act.logits[c] - mx);
        sum += act.probs[c];
    }
    for (auto& p : act.probs) p /= sum;
}

Probs forward(const ModelParams& params, const FeatureVector& x) {
    Activations act;
    forward(params, x, act);
    return act.probs;
}

void backward_into(const ModelParams& params, const FeatureVector& x, const Activations& act,
                   std::span<const double> dl_dp, double scale, Gradient& grad) {
    const std::size_t H = params.hidden, C = params.classes;
    if (dl_dp.size() != C) throw ContractError("dL/dp has wrong length");
    // softmax Jacobian: dz_i = p_i (g_i - sum_j p_j g_j)
    double pg = 0.0;
    for (std::size_t c = 0; c < C; ++c) pg += act.probs[c] * dl_dp[c];
    std::vector<double> dz(C);
    for (std::size_t c = 0; c < C; ++c) dz[c] = scale * act.probs[c] * (dl_dp[c] - pg);

    std::vector<double> da(H, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
        grad.b2[c] += dz[c];
        double* gw = grad.w2.data() + c * H;
        const double* w = params.w2.data() + c * H;
        for (std::size_t h = 0; h < H; ++h) {
            gw[h] += dz[c] * act.hidden[h];
            da[h] += w[h] * dz[c];
        }
    }
    // relu subgradient is 0 at 0
    for (std::size_t h = 0; h < H; ++h)
        if (!(act.pre[h] > 0.0)) da[h] = 0.0;
    for (std::size_t h = 0; h < H; ++h) grad.b1[h] += da[h];
    for (const auto& [col, v] : x.entries) {
        double* g = grad.column(col);
        for (std::size_t h = 0; h < H; ++h) g[h] += da[h] * v;
    }
    if (x.overlap != 0.0) {
        double* g = grad.column(static_cast<std::uint32_t>(params.dim));
        for (std::size_t h = 0; h < H; ++h) g[h] += da[h] * x.overlap;
    }
}

Gradient backward(const ModelParams& params, const FeatureVector& x, std::span<const double> dl_dp) {
    Activations act;
    forward(params, x, act);
    Gradient g = Gradient::zeros_like(params);
    backward_into(params, x, act, dl_dp, 1.0, g);
    return g;
}

double lr_at(const LRSchedule& s, std::size_t step) {
    if (s.total_steps == 0) throw ContractError("learning-rate schedule needs total_steps >= 1");
    if (step > s.total_steps) throw ContractError("step outside learning-rate schedule");
    const std::size_t T = s.total_steps;
    const std::size_t apex = (T + 1) / 2;
    if (step <= apex) return s.peak * static_cast<double>(step) / static_cast<double>(apex);
    return s.peak * static_cast<double>(T - step) / static_cast<double>(T - apex);
}

void sgd_step_inplace(ModelParams& params, const Gradient& grad, double lr) {
    if (lr < 0.0) throw ContractError("learning rate must be non-negative");
    if (!grad.all_finite()) throw TrainingError("non-finite gradient; aborting run");
    const std::size_t H = params.hidden;
    if (grad.hidden != H || grad.b2.size() != params.classes)
        throw ContractError("gradient shape does not match parameters");
    for (std::size_t k = 0; k < grad.cols.size(); ++k) {
        double* w = params.w1.data() + static_cast<std::size_t>(grad.cols[k]) * H;
        const double* g = grad.w1_cols.data() + k * H;
        for (std::size_t h = 0; h < H; ++h) w[h] -= lr * g[h];
    }
    for (std::size_t i = 0; i < H; ++i) params.b1[i] -= lr * grad.b1[i];
    for (std::size_t i = 0; i < params.w2.size(); ++i) params.w2[i] -= lr * grad.w2[i];
    for (std::size_t i = 0; i < params.b2.size(); ++i) params.b2[i] -= lr * grad.b2[i];
}

ModelParams sgd_step(const ModelParams& params, const Gradient& grad, double lr) {
    ModelParams out = params;
    sgd_step_inplace(out, grad, lr);
    return out;
}

std::string format_checkpoint(const ModelParams& p) {
    std::string out;
    out.reserve(p.w1.size() * 24 + 256);
    char buf[40];
    std::snprintf(buf, sizeof buf, "tinynet %zu %zu %zu ", p.dim, p.hidden, p.classes);
    out += buf;
    out += std::to_string(p.seed);
    out += '\n';
    auto put = [&](double v, bool first) {
        if (!first) out += ' ';
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out += buf;
    };
    for (std::size_t h = 0; h < p.hidden; ++h) {
        for (std::size_t col = 0; col <= p.dim; ++col) put(p.w1_at(h, col), col == 0);
        out += '\n';
    }
    for (std::size_t h = 0; h < p.hidden; ++h) put(p.b1[h], h == 0);
    out += '\n';
    for (std::size_t c = 0; c < p.classes; ++c) {
        for (std::size_t h = 0; h < p.hidden; ++h) put(p.w2_at(c, h), h == 0);
        out += '\n';
    }
    for (std::size_t c = 0; c < p.classes; ++c) put(p.b2[c], c == 0);
    out += '\n';
    return out;
}

ModelParams parse_checkpoint(std::string_view text) {
    std::string buf(text);
    const char* cur = buf.c_str();
    char* end = nullptr;
    auto expect_word = [&](const char* w) {
        while (*cur == ' ' || *cur == '\n') ++cur;
        std::size_t n = std::char_traits<char>::length(w);
        if (std::string_view(cur, std::min(n, std::strlen(cur))) != w)
            throw ParseError("checkpoint: missing 'tinynet' header", 1);
        cur += n;
    };
    auto next_uint = [&]() -> unsigned long long {
        unsigned long long v = std::strtoull(cur, &end, 10);
        if (end == cur) throw ParseError("checkpoint: malformed header", 1);
        cur = end;
        return v;
    };
    auto next_double = [&]() -> double {
        double v = std::strtod(cur, &end);
        if (end == cur) throw ParseError("checkpoint: truncated weight data", 0);
        cur = end;
        return v;
    };
    expect_word("tinynet");
    const auto dim = static_cast<std::size_t>(next_uint());
    const auto hidden = static_cast<std::size_t>(next_uint());
    const auto classes = static_cast<std::size_t>(next_uint());
    const auto seed = static_cast<std::uint64_t>(next_uint());
    ModelParams p = ModelParams::zeros(dim, hidden, classes);
    p.seed = seed;
    for (std::size_t h = 0; h < hidden; ++h)
        for (std::size_t col = 0; col <= dim; ++col) p.w1_at(h, col) = next_double();
    for (auto& v : p.b1) v = next_double();
    for (std::size_t c = 0; c < classes; ++c)
        for (std::size_t h = 0; h < hidden; ++h) p.w2_at(c, h) = next_double();
    for (auto& v : p.b2) v = next_double();
    if (!p.all_finite()) throw ValidationError("checkpoint contains non-finite weights");
    return p;
}

void save_checkpoint(const ModelParams& p, const std::filesystem::path& path) {
    write_text_file(path, format_checkpoint(p));
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    return parse_checkpoint(read_text_file(path));
}

}  // namespace rkd
