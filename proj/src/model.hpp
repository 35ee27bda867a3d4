#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "config.hpp"
#include "errors.hpp"
#include "ops.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace hmsr {

// ---------------------------------------------------------------------------
// Backbone: shallow 3->C embedding, L residual blocks (conv-lrelu-conv with
// identity skip), and a global-residual fusion producing the feature map the
// experts consume. All feature maps keep the LR spatial size.

template <typename T>
struct ResidualBlock {
    Conv2d<T> conv1, conv2;
    T slope = T(0.01);

    struct Cache {
        Tensor<T> input;  // block input
        Tensor<T> mid;    // conv1 output (pre-activation)
        Tensor<T> act;    // lrelu(mid)
    };

    ResidualBlock() = default;
    ResidualBlock(const std::string& name, int channels, T slope_)
        : conv1(name + ".conv1", channels, channels, 3),
          conv2(name + ".conv2", channels, channels, 3),
          slope(slope_) {}

    Tensor<T> forward(const Tensor<T>& x, Cache* cache) const {
        Tensor<T> mid = conv1.forward(x);
        Tensor<T> act = leaky_relu(mid, slope);
        Tensor<T> y = conv2.forward(act);
        y.add(x);
        if (cache) {
            cache->input = x;
            cache->mid = std::move(mid);
            cache->act = std::move(act);
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, const Cache& cache) {
        Tensor<T> da = conv2.backward(dy, cache.act);
        Tensor<T> dm = leaky_relu_backward(da, cache.mid, slope);
        Tensor<T> dx = conv1.backward(dm, cache.input);
        dx.add(dy);  // identity skip
        return dx;
    }

    void collect_params(std::vector<Param<T>*>& out) {
        conv1.collect_params(out);
        conv2.collect_params(out);
    }
};

template <typename T>
struct Backbone {
    Conv2d<T> stem;                        // 3 -> C
    std::vector<ResidualBlock<T>> blocks;  // L of them
    Conv2d<T> fuse;                        // C -> C, combined with + f0
    T slope = T(0.01);

    struct Cache {
        Tensor<T> lr_input;
        Tensor<T> f0;
        std::vector<typename ResidualBlock<T>::Cache> block_caches;
        std::vector<Tensor<T>> levels;  // X^1 .. X^L
    };

    Backbone() = default;
    Backbone(const BackboneConfig& cfg, T slope_) : slope(slope_) {
        if (cfg.block_kind != "lightweight_residual")
            throw ConfigError("backbone.block_kind '" + cfg.block_kind +
                              "' is an extension point; this build provides 'lightweight_residual'");
        stem = Conv2d<T>("backbone.stem", 3, cfg.channels, 3);
        for (int i = 0; i < cfg.blocks; ++i)
            blocks.emplace_back("backbone.block" + std::to_string(i), cfg.channels, slope_);
        fuse = Conv2d<T>("backbone.fuse", cfg.channels, cfg.channels, 3);
    }

    Tensor<T> shallow_embed(const Tensor<T>& lr) const {
        if (lr.c != 3) throw std::invalid_argument("shallow_embed: expected 3 input channels");
        return stem.forward(lr);
    }

    std::vector<Tensor<T>> run_blocks(const Tensor<T>& f0,
                                      std::vector<typename ResidualBlock<T>::Cache>* caches) const {
        std::vector<Tensor<T>> levels;
        levels.reserve(blocks.size());
        if (caches) caches->resize(blocks.size());
        const Tensor<T>* cur = &f0;
        for (size_t i = 0; i < blocks.size(); ++i) {
            Tensor<T> out = blocks[i].forward(*cur, caches ? &(*caches)[i] : nullptr);
            if (!out.all_finite())
                throw std::runtime_error("backbone block " + std::to_string(i) +
                                         " produced non-finite values");
            levels.push_back(std::move(out));
            cur = &levels.back();
        }
        return levels;
    }

    // x_feat = fuse(X^L) + f0
    Tensor<T> final_feature(const std::vector<Tensor<T>>& levels, const Tensor<T>& f0) const {
        if (levels.empty()) throw ConfigError("final_feature: no levels");
        if (!levels.back().same_shape(f0)) throw ConfigError("final_feature: shape mismatch");
        Tensor<T> y = fuse.forward(levels.back());
        y.add(f0);
        return y;
    }

    Tensor<T> forward(const Tensor<T>& lr, Cache* cache) const {
        Tensor<T> f0 = shallow_embed(lr);
        std::vector<Tensor<T>> levels = run_blocks(f0, cache ? &cache->block_caches : nullptr);
        Tensor<T> x_feat = final_feature(levels, f0);
        if (cache) {
            cache->lr_input = lr;
            cache->f0 = std::move(f0);
            cache->levels = std::move(levels);
        }
        return x_feat;
    }

    // d_levels[i] holds external gradients flowing into X^{i+1} (from the MFA);
    // d_feat is the gradient of x_feat. Returns gradient w.r.t. the LR input.
    Tensor<T> backward(const Tensor<T>& d_feat, std::vector<Tensor<T>>& d_levels, const Cache& cache) {
        Tensor<T> d_f0 = d_feat;  // global residual
        // through the fusion conv into X^L
        Tensor<T> d_level = fuse.backward(d_feat, cache.levels.back());
        for (size_t i = blocks.size(); i-- > 0;) {
            if (d_levels.size() > i && d_levels[i].size() > 0) d_level.add(d_levels[i]);
            Tensor<T> d_in = blocks[i].backward(d_level, cache.block_caches[i]);
            if (i == 0) {
                d_f0.add(d_in);
            } else {
                d_level = std::move(d_in);
            }
        }
        return stem.backward(d_f0, cache.lr_input);
    }

    void collect_params(std::vector<Param<T>*>& out) {
        stem.collect_params(out);
        for (auto& b : blocks) b.collect_params(out);
        fuse.collect_params(out);
    }
};

// ---------------------------------------------------------------------------
// Multi-level feature aggregation: per-level conv + LeakyReLU, summation,
// layer norm, fusing conv + LeakyReLU. Output guides both routers.

template <typename T>
struct Mfa {
    std::vector<Conv2d<T>> level_convs;
    LayerNorm<T> ln;
    Conv2d<T> fuse;
    T slope = T(0.01);
    bool detach_router_input = false;

    struct Cache {
        std::vector<Tensor<T>> level_inputs;  // X^i
        std::vector<Tensor<T>> level_pre;     // conv outputs, pre-activation
        Tensor<T> x_sum;
        LayerNormCache<T> ln_cache;
        Tensor<T> ln_out;
        Tensor<T> fuse_pre;
    };

    Mfa() = default;
    Mfa(const MfaConfig& cfg, int channels, int levels) : slope(static_cast<T>(cfg.leaky_slope)) {
        detach_router_input = cfg.detach_router_input;
        for (int i = 0; i < levels; ++i)
            level_convs.emplace_back("mfa.level" + std::to_string(i), channels, channels,
                                     cfg.level_kernel);
        ln = LayerNorm<T>("mfa.ln", channels);
        fuse = Conv2d<T>("mfa.fuse", channels, channels, cfg.fuse_kernel);
    }

    // X^i' = LeakyReLU(Conv2D_i(X^i))
    Tensor<T> level_transform(size_t i, const Tensor<T>& xi, Cache* cache) const {
        Tensor<T> pre = level_convs.at(i).forward(xi);
        Tensor<T> out = leaky_relu(pre, slope);
        if (cache) {
            cache->level_inputs[i] = xi;
            cache->level_pre[i] = std::move(pre);
        }
        return out;
    }

    // X^sum = sum_i X^i'; X^agg = LeakyReLU(Conv2D(LN(X^sum)))
    Tensor<T> aggregate(const std::vector<Tensor<T>>& levels_prime, Cache* cache) const {
        if (levels_prime.empty()) throw ConfigError("mfa.aggregate: empty level list");
        Tensor<T> x_sum = levels_prime.front();
        for (size_t i = 1; i < levels_prime.size(); ++i) x_sum.add(levels_prime[i]);
        Tensor<T> ln_out = ln.forward(x_sum, cache ? &cache->ln_cache : nullptr);
        Tensor<T> fuse_pre = fuse.forward(ln_out);
        Tensor<T> x_agg = leaky_relu(fuse_pre, slope);
        if (cache) {
            cache->x_sum = std::move(x_sum);
            cache->ln_out = std::move(ln_out);
            cache->fuse_pre = std::move(fuse_pre);
        }
        return x_agg;
    }

    Tensor<T> forward(const std::vector<Tensor<T>>& levels, Cache* cache) const {
        if (levels.size() != level_convs.size())
            throw ConfigError("mfa: expected " + std::to_string(level_convs.size()) + " levels, got " +
                              std::to_string(levels.size()));
        if (cache) {
            cache->level_inputs.resize(levels.size());
            cache->level_pre.resize(levels.size());
        }
        std::vector<Tensor<T>> primes;
        primes.reserve(levels.size());
        for (size_t i = 0; i < levels.size(); ++i) primes.push_back(level_transform(i, levels[i], cache));
        return aggregate(primes, cache);
    }

    // Returns per-level gradients d X^i.
    std::vector<Tensor<T>> backward(const Tensor<T>& d_agg, const Cache& cache) {
        Tensor<T> d_fuse_pre = leaky_relu_backward(d_agg, cache.fuse_pre, slope);
        Tensor<T> d_ln_out = fuse.backward(d_fuse_pre, cache.ln_out);
        Tensor<T> d_sum = ln.backward(d_ln_out, cache.ln_cache);
        std::vector<Tensor<T>> d_levels(level_convs.size());
        for (size_t i = 0; i < level_convs.size(); ++i) {
            Tensor<T> d_pre = leaky_relu_backward(d_sum, cache.level_pre[i], slope);
            d_levels[i] = level_convs[i].backward(d_pre, cache.level_inputs[i]);
        }
        return d_levels;
    }

    void collect_params(std::vector<Param<T>*>& out) {
        for (auto& c : level_convs) c.collect_params(out);
        ln.collect_params(out);
        fuse.collect_params(out);
    }
};

// ---------------------------------------------------------------------------
// Per-pixel routing decision for one forward pass (K selected experts per
// pixel plus the gate probabilities that weighted them).

template <typename T>
struct RoutingDecision {
    int h = 0, w = 0;
    int top_k = 1;
    std::vector<int> group_offsets;     // prefix sums of group sizes, length N+1
    std::vector<int> group_idx;         // h*w, hard group per pixel
    std::vector<int> expert_idx;        // h*w*K, within-group indices
    std::vector<T> group_prob;          // h*w, probability of the selected group
    std::vector<T> expert_prob;         // h*w*K, probabilities of selected experts
    Tensor<T> group_probs_full;         // N x H x W

    int num_groups() const { return static_cast<int>(group_offsets.size()) - 1; }
    int total_experts() const { return group_offsets.back(); }
    int global_id(int pixel, int slot) const {
        return group_offsets[group_idx[pixel]] + expert_idx[static_cast<size_t>(pixel) * top_k + slot];
    }
};

template <typename T>
std::vector<int64_t> usage_histogram(const RoutingDecision<T>& d) {
    std::vector<int64_t> counts(d.total_experts(), 0);
    for (int p = 0; p < d.h * d.w; ++p)
        for (int k = 0; k < d.top_k; ++k) ++counts[d.global_id(p, k)];
    return counts;
}

// ---------------------------------------------------------------------------
// Dual-routing heterogeneous mixture-of-experts upsampling head.
//
// Group routing: p_i = softmax(W_g . x_agg) per pixel, hard top-1 with
// lowest-index tie break. Expert routing inside the selected group i:
// p_j = softmax(W_i . (x_agg + PE_i)). The K highest-probability experts run
// and their pixel-shuffled outputs are combined weighted by p_i * p_j, so
// both routers receive gradient through the gates (no straight-through
// estimator; unselected groups and experts get zero gradient from the
// output path).

template <typename T>
struct DrHmoe {
    MoeConfig cfg;
    int channels = 0;
    Conv2d<T> group_router;                   // C -> N, 1x1, no bias
    std::vector<Conv2d<T>> expert_routers;    // per group: C -> M_i, 1x1, no bias
    Param<T> pe;                              // N x C positional encodings
    std::vector<std::vector<Conv2d<T>>> experts;  // [group][expert]: C -> 3*s^2

    struct Cache {
        Tensor<T> x_feat, x_agg;
        Tensor<T> group_probs;                      // N x H x W
        std::vector<Tensor<T>> router_inputs;       // x_agg + PE_i, per group
        std::vector<Tensor<T>> expert_probs;        // per group: M_i x H x W
        std::vector<int> group_idx;                 // argmax map
        std::vector<std::vector<int>> topk;         // per group: h*w*K selected indices
        std::vector<std::vector<Tensor<T>>> expert_out;  // shuffled outputs, dense path
        double aux_loss = 0.0;
    };

    DrHmoe() = default;
    DrHmoe(const MoeConfig& moe, int channels_) : cfg(moe), channels(channels_) {
        const int n = static_cast<int>(cfg.groups.size());
        group_router = Conv2d<T>("head.group_router", channels, n, 1, /*bias=*/false);
        pe = Param<T>("head.pe", n, channels, 1);
        const int out_c = 3 * cfg.scale * cfg.scale;
        for (int i = 0; i < n; ++i) {
            const auto& g = cfg.groups[i];
            if (cfg.top_k > g.experts)
                throw ConfigError("moe.top_k exceeds experts in group " + std::to_string(i));
            expert_routers.emplace_back("head.expert_router" + std::to_string(i), channels, g.experts,
                                        1, /*bias=*/false);
            std::vector<Conv2d<T>> row;
            for (int j = 0; j < g.experts; ++j)
                row.emplace_back("head.expert" + std::to_string(i) + "_" + std::to_string(j), channels,
                                 out_c, g.kernel);
            experts.push_back(std::move(row));
        }
        if (cfg.pe_kind == "sinusoidal") init_sinusoidal_pe();
    }

    int num_groups() const { return static_cast<int>(cfg.groups.size()); }
    std::vector<int> group_offsets() const {
        std::vector<int> off(1, 0);
        for (const auto& g : cfg.groups) off.push_back(off.back() + g.experts);
        return off;
    }

    void init_sinusoidal_pe() {
        for (int i = 0; i < num_groups(); ++i)
            for (int c = 0; c < channels; ++c) {
                const double freq = std::pow(10000.0, -2.0 * (c / 2) / static_cast<double>(channels));
                pe.value.at(i, c, 0) =
                    static_cast<T>(c % 2 == 0 ? std::sin(i * freq) : std::cos(i * freq));
            }
    }

    // Eq.-5 stage: per-pixel group probabilities and the hard group map.
    Tensor<T> route_groups(const Tensor<T>& x_agg, std::vector<int>* hard_idx) const {
        Tensor<T> logits = group_router.forward(x_agg);
        Tensor<T> probs = softmax_channels(logits);
        if (hard_idx) *hard_idx = argmax_channels(probs);
        return probs;
    }

    Tensor<T> router_input(const Tensor<T>& x_agg, int group) const {
        Tensor<T> xin = x_agg;
        const int hw = x_agg.h * x_agg.w;
        for (int c = 0; c < x_agg.c; ++c) {
            const T p = pe.value.at(group, c, 0);
            T* row = xin.data() + static_cast<size_t>(c) * hw;
            for (int i = 0; i < hw; ++i) row[i] += p;
        }
        return xin;
    }

    // Eq.-6 stage for one group: expert probabilities from x_agg + PE_i.
    Tensor<T> route_experts(const Tensor<T>& x_agg, int group, Tensor<T>* router_in) const {
        Tensor<T> xin = router_input(x_agg, group);
        Tensor<T> logits = expert_routers[group].forward(xin);
        if (router_in) *router_in = std::move(xin);
        return softmax_channels(logits);
    }

    // Top-K selection per pixel, ties to the lowest index.
    static std::vector<int> select_topk(const Tensor<T>& probs, int k) {
        const int hw = probs.h * probs.w;
        const int m = probs.c;
        std::vector<int> sel(static_cast<size_t>(hw) * k);
        std::vector<std::pair<T, int>> order(m);
        for (int p = 0; p < hw; ++p) {
            for (int j = 0; j < m; ++j)
                order[j] = {probs.v[static_cast<size_t>(j) * hw + p], j};
            std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
                return a.first > b.first || (a.first == b.first && a.second < b.second);
            });
            for (int s = 0; s < k; ++s) sel[static_cast<size_t>(p) * k + s] = order[s].second;
        }
        return sel;
    }

    // One expert: conv to 3*s^2 channels then pixel shuffle.
    Tensor<T> expert_forward(int group, int j, const Tensor<T>& x_feat) const {
        return pixel_shuffle(experts[group][j].forward(x_feat), cfg.scale);
    }

    Tensor<T> forward(const Tensor<T>& x_feat, const Tensor<T>& x_agg, Cache* cache,
                      RoutingDecision<T>* decision) const {
        if (x_feat.c != channels) throw ConfigError("head: x_feat channel mismatch");
        if (x_feat.h != x_agg.h || x_feat.w != x_agg.w)
            throw ConfigError("head: x_feat and x_agg not aligned");
        const int n = num_groups();
        const int hw = x_feat.h * x_feat.w;
        const int s = cfg.scale;
        const int k = cfg.top_k;

        std::vector<int> group_idx;
        Tensor<T> gp = route_groups(x_agg, &group_idx);

        std::vector<Tensor<T>> router_inputs(n), expert_probs(n);
        std::vector<std::vector<int>> topk(n);
        for (int i = 0; i < n; ++i) {
            expert_probs[i] = route_experts(x_agg, i, &router_inputs[i]);
            topk[i] = select_topk(expert_probs[i], k);
        }

        std::vector<std::vector<Tensor<T>>> expert_out(n);
        const bool sparse = cfg.exec == "sparse" && !cache;
        if (!sparse) {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < cfg.groups[i].experts; ++j)
                    expert_out[i].push_back(expert_forward(i, j, x_feat));
        }

        Tensor<T> out(3, x_feat.h * s, x_feat.w * s);
        std::vector<T> expert_buf(static_cast<size_t>(3) * s * s);
        for (int p = 0; p < hw; ++p) {
            const int py = p / x_feat.w, px = p % x_feat.w;
            for (int i = 0; i < n; ++i) {
                T gw;
                if (cfg.soft_group_mix) {
                    gw = gp.v[static_cast<size_t>(i) * hw + p];
                } else {
                    if (i != group_idx[p]) continue;
                    gw = gp.v[static_cast<size_t>(i) * hw + p];
                }
                T renorm = T(1);
                if (cfg.renormalize_topk) {
                    T sum = 0;
                    for (int slot = 0; slot < k; ++slot)
                        sum += expert_probs[i]
                                   .v[static_cast<size_t>(topk[i][static_cast<size_t>(p) * k + slot]) * hw + p];
                    renorm = sum > T(0) ? T(1) / sum : T(1);
                }
                for (int slot = 0; slot < k; ++slot) {
                    const int j = topk[i][static_cast<size_t>(p) * k + slot];
                    const T ew = expert_probs[i].v[static_cast<size_t>(j) * hw + p] * renorm;
                    const T gate = gw * ew;
                    if (sparse) {
                        experts[i][j].forward_at(x_feat, py, px, expert_buf.data());
                        for (int c = 0; c < 3; ++c)
                            for (int r = 0; r < s; ++r)
                                for (int t = 0; t < s; ++t)
                                    out.at(c, py * s + r, px * s + t) +=
                                        gate * expert_buf[(c * s + r) * s + t];
                    } else {
                        const Tensor<T>& eo = expert_out[i][j];
                        for (int c = 0; c < 3; ++c)
                            for (int r = 0; r < s; ++r)
                                for (int t = 0; t < s; ++t)
                                    out.at(c, py * s + r, px * s + t) +=
                                        gate * eo.at(c, py * s + r, px * s + t);
                    }
                }
            }
        }

        double aux = 0.0;
        if (cfg.balance_coeff > 0.0) {
            // switch-style load balance: N * sum_i f_i * P_i
            for (int i = 0; i < n; ++i) {
                double f = 0.0, pr = 0.0;
                for (int p = 0; p < hw; ++p) {
                    if (group_idx[p] == i) f += 1.0;
                    pr += static_cast<double>(gp.v[static_cast<size_t>(i) * hw + p]);
                }
                aux += (f / hw) * (pr / hw);
            }
            aux *= n;
        }

        if (decision) {
            decision->h = x_feat.h;
            decision->w = x_feat.w;
            decision->top_k = k;
            decision->group_offsets = group_offsets();
            decision->group_idx = group_idx;
            decision->group_probs_full = gp;
            decision->group_prob.resize(hw);
            decision->expert_idx.resize(static_cast<size_t>(hw) * k);
            decision->expert_prob.resize(static_cast<size_t>(hw) * k);
            for (int p = 0; p < hw; ++p) {
                const int g = group_idx[p];
                decision->group_prob[p] = gp.v[static_cast<size_t>(g) * hw + p];
                for (int slot = 0; slot < k; ++slot) {
                    const int j = topk[g][static_cast<size_t>(p) * k + slot];
                    decision->expert_idx[static_cast<size_t>(p) * k + slot] = j;
                    decision->expert_prob[static_cast<size_t>(p) * k + slot] =
                        expert_probs[g].v[static_cast<size_t>(j) * hw + p];
                }
            }
        }
        if (cache) {
            cache->x_feat = x_feat;
            cache->x_agg = x_agg;
            cache->group_probs = std::move(gp);
            cache->router_inputs = std::move(router_inputs);
            cache->expert_probs = std::move(expert_probs);
            cache->group_idx = std::move(group_idx);
            cache->topk = std::move(topk);
            cache->expert_out = std::move(expert_out);
            cache->aux_loss = aux;
        }
        return out;
    }

    // Returns {d_x_feat, d_x_agg}; parameter gradients accumulate in place.
    // balance_scale multiplies the auxiliary load-balance gradient (pass the
    // same coefficient that was applied to the aux loss term).
    std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& d_out, const Cache& cache,
                                             double balance_scale = 0.0) {
        const int n = num_groups();
        const int hw = cache.x_feat.h * cache.x_feat.w;
        const int s = cfg.scale;
        const int k = cfg.top_k;

        Tensor<T> d_gp(n, cache.x_feat.h, cache.x_feat.w);
        std::vector<Tensor<T>> d_ep;
        std::vector<std::vector<Tensor<T>>> d_eout(n);
        std::vector<std::vector<bool>> touched(n);
        for (int i = 0; i < n; ++i) {
            d_ep.emplace_back(cfg.groups[i].experts, cache.x_feat.h, cache.x_feat.w);
            d_eout[i].resize(cfg.groups[i].experts);
            touched[i].assign(cfg.groups[i].experts, false);
        }

        std::vector<T> dots(k), ews(k);
        for (int p = 0; p < hw; ++p) {
            const int py = p / cache.x_feat.w, px = p % cache.x_feat.w;
            for (int i = 0; i < n; ++i) {
                if (!cfg.soft_group_mix && i != cache.group_idx[p]) continue;
                const T gw = cache.group_probs.v[static_cast<size_t>(i) * hw + p];
                T renorm = T(1), sum = T(0);
                if (cfg.renormalize_topk) {
                    for (int slot = 0; slot < k; ++slot)
                        sum += cache.expert_probs[i]
                                   .v[static_cast<size_t>(cache.topk[i][static_cast<size_t>(p) * k + slot]) * hw +
                                      p];
                    renorm = sum > T(0) ? T(1) / sum : T(1);
                }
                // dot_j = <E_ij block, d_out block>; accumulate gate grads
                T d_gw = 0;
                for (int slot = 0; slot < k; ++slot) {
                    const int j = cache.topk[i][static_cast<size_t>(p) * k + slot];
                    const Tensor<T>& eo = cache.expert_out[i][j];
                    T dot = 0;
                    for (int c = 0; c < 3; ++c)
                        for (int r = 0; r < s; ++r)
                            for (int t = 0; t < s; ++t)
                                dot += eo.at(c, py * s + r, px * s + t) *
                                       d_out.at(c, py * s + r, px * s + t);
                    const T ew = cache.expert_probs[i].v[static_cast<size_t>(j) * hw + p] * renorm;
                    dots[slot] = dot;
                    ews[slot] = ew;
                    d_gw += ew * dot;
                    // gradient into the expert output block
                    if (d_eout[i][j].size() == 0)
                        d_eout[i][j] = Tensor<T>(3, cache.x_feat.h * s, cache.x_feat.w * s);
                    touched[i][j] = true;
                    const T gate = gw * ew;
                    for (int c = 0; c < 3; ++c)
                        for (int r = 0; r < s; ++r)
                            for (int t = 0; t < s; ++t)
                                d_eout[i][j].at(c, py * s + r, px * s + t) +=
                                    gate * d_out.at(c, py * s + r, px * s + t);
                }
                d_gp.v[static_cast<size_t>(i) * hw + p] += d_gw;
                // gradient into the (raw) expert probabilities
                if (cfg.renormalize_topk) {
                    // gate_j = gw * E_j / S with S = sum of selected raw probs
                    T dq_dot = 0;
                    for (int slot = 0; slot < k; ++slot) dq_dot += ews[slot] * gw * dots[slot];
                    for (int slot = 0; slot < k; ++slot) {
                        const int j = cache.topk[i][static_cast<size_t>(p) * k + slot];
                        d_ep[i].v[static_cast<size_t>(j) * hw + p] +=
                            (gw * dots[slot] - dq_dot) * renorm;
                    }
                } else {
                    for (int slot = 0; slot < k; ++slot) {
                        const int j = cache.topk[i][static_cast<size_t>(p) * k + slot];
                        d_ep[i].v[static_cast<size_t>(j) * hw + p] += gw * dots[slot];
                    }
                }
            }
        }

        if (balance_scale > 0.0) {
            // d aux / d gp[i][p] = N * f_i / hw (f_i held fixed: the hard
            // assignment is piecewise constant)
            std::vector<double> f(n, 0.0);
            for (int p = 0; p < hw; ++p) f[cache.group_idx[p]] += 1.0;
            for (int i = 0; i < n; ++i) {
                const T g = static_cast<T>(balance_scale * n * (f[i] / hw) / hw);
                for (int p = 0; p < hw; ++p) d_gp.v[static_cast<size_t>(i) * hw + p] += g;
            }
        }

        Tensor<T> d_x_feat(cache.x_feat.c, cache.x_feat.h, cache.x_feat.w);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < cfg.groups[i].experts; ++j) {
                if (!touched[i][j]) continue;
                Tensor<T> d_conv = pixel_unshuffle(d_eout[i][j], s);
                d_x_feat.add(experts[i][j].backward(d_conv, cache.x_feat));
            }

        // routers
        Tensor<T> d_glogits = softmax_channels_backward(d_gp, cache.group_probs);
        Tensor<T> d_x_agg = group_router.backward(d_glogits, cache.x_agg);
        for (int i = 0; i < n; ++i) {
            Tensor<T> d_elogits = softmax_channels_backward(d_ep[i], cache.expert_probs[i]);
            Tensor<T> d_xin = expert_routers[i].backward(d_elogits, cache.router_inputs[i]);
            // x_agg and the broadcast PE row both receive d_xin
            d_x_agg.add(d_xin);
            if (cfg.pe_kind == "learned") {
                for (int c = 0; c < channels; ++c) {
                    T acc = 0;
                    const T* row = d_xin.data() + static_cast<size_t>(c) * hw;
                    for (int p = 0; p < hw; ++p) acc += row[p];
                    pe.grad.at(i, c, 0) += acc;
                }
            }
        }
        return {std::move(d_x_feat), std::move(d_x_agg)};
    }

    void collect_params(std::vector<Param<T>*>& out) {
        group_router.collect_params(out);
        for (auto& r : expert_routers) r.collect_params(out);
        if (cfg.pe_kind == "learned") out.push_back(&pe);
        for (auto& row : experts)
            for (auto& e : row) e.collect_params(out);
    }
};

// ---------------------------------------------------------------------------
// Full pipeline: I_SR = head(backbone(I_LR), mfa(levels)).

template <typename T>
struct SrModel {
    Backbone<T> backbone;
    Mfa<T> mfa;
    DrHmoe<T> head;
    int scale = 4;
    bool detach_router_input = false;

    struct Cache {
        typename Backbone<T>::Cache backbone;
        typename Mfa<T>::Cache mfa;
        typename DrHmoe<T>::Cache head;
        Tensor<T> x_feat;
        Tensor<T> x_agg;
    };

    SrModel() = default;
    explicit SrModel(const ExperimentConfig& cfg)
        : backbone(cfg.backbone, static_cast<T>(cfg.mfa.leaky_slope)),
          mfa(cfg.mfa, cfg.backbone.channels, cfg.backbone.blocks),
          head(cfg.moe, cfg.backbone.channels),
          scale(cfg.moe.scale),
          detach_router_input(cfg.mfa.detach_router_input) {}

    Tensor<T> forward(const Tensor<T>& lr, Cache* cache, RoutingDecision<T>* decision = nullptr) const {
        if (cache) {
            Tensor<T> x_feat = backbone.forward(lr, &cache->backbone);
            Tensor<T> x_agg = mfa.forward(cache->backbone.levels, &cache->mfa);
            Tensor<T> out = head.forward(x_feat, x_agg, &cache->head, decision);
            cache->x_feat = std::move(x_feat);
            cache->x_agg = std::move(x_agg);
            return out;
        }
        // inference path: keeps only the per-level maps the MFA needs
        Tensor<T> f0 = backbone.shallow_embed(lr);
        std::vector<Tensor<T>> levels = backbone.run_blocks(f0, nullptr);
        Tensor<T> x_feat = backbone.final_feature(levels, f0);
        Tensor<T> x_agg = mfa.forward(levels, nullptr);
        return head.forward(x_feat, x_agg, nullptr, decision);
    }

    double aux_loss(const Cache& cache) const { return cache.head.aux_loss; }

    // Accumulates parameter gradients; returns gradient w.r.t. the LR input.
    // balance_scale weights the auxiliary load-balance gradient (defaults to
    // the configured coefficient; divide by the batch size when averaging).
    Tensor<T> backward(const Tensor<T>& d_out, const Cache& cache, double balance_scale = -1.0) {
        if (balance_scale < 0.0) balance_scale = head.cfg.balance_coeff;
        auto [d_x_feat, d_x_agg] = head.backward(d_out, cache.head, balance_scale);
        std::vector<Tensor<T>> d_levels;
        if (!detach_router_input) {
            d_levels = mfa.backward(d_x_agg, cache.mfa);
        } else {
            d_levels.resize(backbone.blocks.size());
        }
        return backbone.backward(d_x_feat, d_levels, cache.backbone);
    }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> out;
        backbone.collect_params(out);
        mfa.collect_params(out);
        head.collect_params(out);
        return out;
    }

    void zero_grads() {
        for (auto* p : params()) p->zero_grad();
    }

    // He-style init for convs (leaky slope aware), small normal for routers
    // and learned PE, identity layer norm. One RNG stream consumed in
    // declaration order keeps initialization deterministic.
    void init_weights(Rng& rng) {
        const double slope = static_cast<double>(mfa.slope);
        auto he = [&](Conv2d<T>& conv) {
            const double fan_in = static_cast<double>(conv.in_c) * conv.k * conv.k;
            const double stddev = std::sqrt(2.0 / ((1.0 + slope * slope) * fan_in));
            fill_normal(conv.w.value, rng, stddev);
            if (conv.has_bias) conv.b.value.zero();
        };
        he(backbone.stem);
        for (auto& b : backbone.blocks) {
            he(b.conv1);
            he(b.conv2);
        }
        he(backbone.fuse);
        for (auto& c : mfa.level_convs) he(c);
        he(mfa.fuse);
        fill_normal(group_router_weight(), rng, 0.02);
        for (auto& r : head.expert_routers) fill_normal(r.w.value, rng, 0.02);
        if (head.cfg.pe_kind == "learned")
            fill_normal(head.pe.value, rng, 0.02);
        else
            head.init_sinusoidal_pe();
        for (auto& row : head.experts)
            for (auto& e : row) he(e);
    }

private:
    Tensor<T>& group_router_weight() { return head.group_router.w.value; }
};

}  // namespace hmsr
