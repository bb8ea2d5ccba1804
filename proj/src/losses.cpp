#include "sclmetric/losses.hpp"

#include <cmath>
#include <string>

#include "sclmetric/errors.hpp"

namespace sclmetric {

namespace {

void require_same(Vec u, Vec v) {
    if (u.size() != v.size())
        throw DimensionError("embedding length mismatch: " + std::to_string(u.size()) + " vs " +
                             std::to_string(v.size()));
}

void require_margin(double m, const char* name) {
    if (!(m > 0.0) || !std::isfinite(m))
        throw ConfigError(std::string(name) + " must be a finite value > 0");
}

Embedding zeros(std::size_t n) { return Embedding(n, 0.0); }

// out += scale · (u − v)
void add_scaled_diff(Embedding& out, double scale, Vec u, Vec v) {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += scale * (u[k] - v[k]);
}

}  // namespace

void SclConfig::validate() const {
    require_margin(alpha1, "alpha1");
    require_margin(alpha2, "alpha2");
}

double squared_euclidean(Vec u, Vec v) {
    require_same(u, v);
    double s = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double d = u[k] - v[k];
        s += d * d;
    }
    return s;
}

double euclidean(Vec u, Vec v) { return std::sqrt(squared_euclidean(u, v)); }

LossValue scl_intra_loss(Vec a, Vec b, Vec c) {
    require_same(a, b);
    const bool has_c = !c.empty();
    if (has_c) require_same(b, c);

    LossValue out;
    out.grad_a = zeros(a.size());
    out.grad_b = zeros(a.size());
    if (has_c) out.grad_c = zeros(a.size());

    out.value = squared_euclidean(a, b);
    add_scaled_diff(out.grad_a, 2.0, a, b);
    add_scaled_diff(out.grad_b, 2.0, b, a);
    if (has_c) {
        out.value += squared_euclidean(b, c);
        add_scaled_diff(out.grad_b, 2.0, b, c);
        add_scaled_diff(out.grad_c, 2.0, c, b);
    }
    return out;
}

LossValue scl_inter_loss(Vec a, Vec b, Vec c, const SclConfig& cfg) {
    cfg.validate();
    require_same(a, b);
    const bool has_c = !c.empty();
    if (has_c) require_same(b, c);

    LossValue out;
    out.grad_a = zeros(a.size());
    out.grad_b = zeros(a.size());
    if (has_c) out.grad_c = zeros(a.size());

    const double d_ab = squared_euclidean(a, b);
    if (d_ab < cfg.alpha1) {
        out.value += cfg.alpha1 - d_ab;
        add_scaled_diff(out.grad_a, -2.0, a, b);
        add_scaled_diff(out.grad_b, -2.0, b, a);
    }
    if (has_c) {
        const double d_bc = squared_euclidean(b, c);
        if (d_bc < cfg.alpha2) {
            out.value += cfg.alpha2 - d_bc;
            add_scaled_diff(out.grad_b, -2.0, b, c);
            add_scaled_diff(out.grad_c, -2.0, c, b);
        }
    }
    return out;
}

LossValue scl_set_loss(SetLabel label, Vec a, Vec b, Vec c, const SclConfig& cfg) {
    return label == SetLabel::Genuine ? scl_intra_loss(a, b, c) : scl_inter_loss(a, b, c, cfg);
}

LossValue scl_set_loss(const SampleSet& set, const SclConfig& cfg) {
    Vec c = set.has_c() ? Vec(set.c->embedding) : Vec{};
    return scl_set_loss(set.label, set.a->embedding, set.b->embedding, c, cfg);
}

double scl_batch_loss(std::span<const SampleSet> sets, const SclConfig& cfg, Reduction reduction) {
    double total = 0.0;
    for (const auto& s : sets) total += scl_set_loss(s, cfg).value;
    if (reduction == Reduction::Mean && !sets.empty()) total /= static_cast<double>(sets.size());
    return total;
}

LossValue contrastive_loss(Vec x1, Vec x2, int label, double margin) {
    require_same(x1, x2);
    require_margin(margin, "contrastive margin");
    if (label != 0 && label != 1) throw ConfigError("contrastive label must be 0 or 1");

    LossValue out;
    out.grad_a = zeros(x1.size());
    out.grad_b = zeros(x1.size());
    const double d2 = squared_euclidean(x1, x2);
    if (label == 0) {
        out.value = 0.5 * d2;
        add_scaled_diff(out.grad_a, 1.0, x1, x2);
        add_scaled_diff(out.grad_b, 1.0, x2, x1);
        return out;
    }
    const double d = std::sqrt(d2);
    if (d >= margin) return out;
    const double gap = margin - d;
    out.value = 0.5 * gap * gap;
    if (d > 0.0) {
        // d/dx1 ½(m−D)² = −(m−D)·(x1−x2)/D
        add_scaled_diff(out.grad_a, -gap / d, x1, x2);
        add_scaled_diff(out.grad_b, -gap / d, x2, x1);
    }
    return out;
}

LossValue triplet_loss(Vec anchor, Vec positive, Vec negative, double margin) {
    require_same(anchor, positive);
    require_same(anchor, negative);
    require_margin(margin, "triplet margin");

    LossValue out;
    out.grad_a = zeros(anchor.size());
    out.grad_b = zeros(anchor.size());
    out.grad_c = zeros(anchor.size());
    const double z =
        squared_euclidean(anchor, positive) - squared_euclidean(anchor, negative) + margin;
    if (z <= 0.0) return out;
    out.value = z;
    // ∂a = 2(a−p) − 2(a−n) = 2(n−p)
    add_scaled_diff(out.grad_a, 2.0, negative, positive);
    add_scaled_diff(out.grad_b, 2.0, positive, anchor);
    add_scaled_diff(out.grad_c, 2.0, anchor, negative);
    return out;
}

}  // namespace sclmetric
