#include "ksreg/series.hpp"

#include <algorithm>

namespace ksreg {

namespace {

constexpr std::size_t kRadix = kMaxOrder + 1;

std::size_t lut_key(const Exponents& e) {
    return ((static_cast<std::size_t>(e[0]) * kRadix + e[1]) * kRadix + e[2]) * kRadix + e[3];
}

// Exponent tuples of total degree d in descending lexicographic order.
void append_degree(int nvars, int d, std::vector<Exponents>& out) {
    Exponents e{};
    auto rec = [&](auto&& self, int var, int left) -> void {
        if (var == nvars - 1) {
            e[static_cast<std::size_t>(var)] = static_cast<std::uint8_t>(left);
            out.push_back(e);
            return;
        }
        for (int k = left; k >= 0; --k) {
            e[static_cast<std::size_t>(var)] = static_cast<std::uint8_t>(k);
            self(self, var + 1, left - k);
        }
        e[static_cast<std::size_t>(var)] = 0;
    };
    rec(rec, 0, d);
}

}  // namespace

MonomialLayout::MonomialLayout(int nvars) : nvars_(nvars) {
    degree_begin_.push_back(0);
    for (int d = 0; d <= kMaxOrder; ++d) {
        append_degree(nvars, d, exps_);
        degree_begin_.push_back(exps_.size());
    }
    const std::size_t n = exps_.size();
    degree_.resize(n);
    lut_.assign(kRadix * kRadix * kRadix * kRadix, static_cast<std::uint32_t>(-1));
    for (std::size_t i = 0; i < n; ++i) {
        int d = 0;
        for (auto x : exps_[i]) d += x;
        degree_[i] = d;
        lut_[lut_key(exps_[i])] = static_cast<std::uint32_t>(i);
    }
    lower_.assign(n * 4, npos);
    raise_.assign(n * 4, npos);
    for (std::size_t i = 0; i < n; ++i) {
        for (int v = 0; v < nvars; ++v) {
            Exponents e = exps_[i];
            if (e[static_cast<std::size_t>(v)] > 0) {
                --e[static_cast<std::size_t>(v)];
                lower_[i * 4 + static_cast<std::size_t>(v)] = lut_[lut_key(e)];
                ++e[static_cast<std::size_t>(v)];
            }
            if (degree_[i] < kMaxOrder) {
                ++e[static_cast<std::size_t>(v)];
                raise_[i * 4 + static_cast<std::size_t>(v)] = lut_[lut_key(e)];
            }
        }
    }
    pair_begin_.push_back(0);
    for (int d = 0; d <= kMaxOrder; ++d) {
        for (std::size_t a = 0; a < degree_begin_[static_cast<std::size_t>(d) + 1]; ++a) {
            const int db = d - degree_[a];
            for (std::size_t b = degree_begin_[static_cast<std::size_t>(db)];
                 b < degree_begin_[static_cast<std::size_t>(db) + 1]; ++b) {
                pairs_.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
                                  static_cast<std::uint32_t>(sum_index(a, b))});
            }
        }
        pair_begin_.push_back(pairs_.size());
    }
}

const MonomialLayout& MonomialLayout::get(int nvars) {
    static const MonomialLayout two(2);
    static const MonomialLayout four(4);
    if (nvars == 2) return two;
    if (nvars == 4) return four;
    throw DimensionError("MonomialLayout: nvars must be 2 or 4");
}

std::size_t MonomialLayout::index(const Exponents& e) const {
    int d = 0;
    for (int v = 0; v < 4; ++v) {
        if (v >= nvars_ && e[static_cast<std::size_t>(v)] != 0)
            throw DimensionError("MonomialLayout::index: exponent on a missing variable");
        d += e[static_cast<std::size_t>(v)];
    }
    if (d > kMaxOrder) throw DimensionError("MonomialLayout::index: degree exceeds 16");
    return lut_[lut_key(e)];
}

std::size_t MonomialLayout::sum_index(std::size_t a, std::size_t b) const {
    const auto& ea = exps_[a];
    const auto& eb = exps_[b];
    Exponents e{static_cast<std::uint8_t>(ea[0] + eb[0]), static_cast<std::uint8_t>(ea[1] + eb[1]),
                static_cast<std::uint8_t>(ea[2] + eb[2]), static_cast<std::uint8_t>(ea[3] + eb[3])};
    return lut_[lut_key(e)];
}

std::span<const MonomialLayout::Pair> MonomialLayout::pairs(int order) const {
    return {pairs_.data(), pair_begin_[static_cast<std::size_t>(order) + 1]};
}

std::span<const MonomialLayout::Pair> MonomialLayout::pairs_of_degree(int d) const {
    const std::size_t lo = pair_begin_[static_cast<std::size_t>(d)];
    const std::size_t hi = pair_begin_[static_cast<std::size_t>(d) + 1];
    return {pairs_.data() + lo, hi - lo};
}

std::vector<double> monomial_values(int nvars, int order, std::span<const double> point) {
    const auto& lay = MonomialLayout::get(nvars);
    std::vector<double> mono(lay.count(order));
    mono[0] = 1.0;
    for (std::size_t i = 1; i < mono.size(); ++i) {
        const auto& e = lay.exponents(i);
        int v = 0;
        while (e[static_cast<std::size_t>(v)] == 0) ++v;
        mono[i] = mono[lay.lower(i, v)] * point[static_cast<std::size_t>(v)];
    }
    return mono;
}

}  // namespace ksreg
