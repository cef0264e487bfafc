#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tdd/bundle.hpp"
#include "tdd/hsi.hpp"
#include "tdd/optim.hpp"
#include "tdd/rng.hpp"
#include "tdd/tensor.hpp"

namespace tdd {

enum class Attention { LAM, GAM };

std::string attention_name(Attention a);
Attention attention_from_name(const std::string& name);

// Architecture description. Encoder block i keeps spatial size
// patch/spatial_factors[i] (ceil division, realized by 2x max-pooling steps)
// and encoder_channels[i] channels; blocks with dilation > 1 trade further
// downsampling for dilated 3x3 convolutions. Decoder block i fuses D_{i-1}
// with E_{7-i} and applies attention_order[i-1] (block 6 has no attention).
struct NetworkConfig {
    int in_bands = 0;
    std::array<int, 6> encoder_channels{32, 64, 128, 128, 128, 128};
    std::array<int, 6> spatial_factors{1, 2, 4, 4, 4, 4};
    std::array<int, 6> dilations{1, 1, 1, 1, 2, 2};
    int heads = 4;
    std::array<int, 2> lam_window{5, 5};
    std::array<Attention, 5> attention_order{Attention::LAM, Attention::GAM, Attention::LAM,
                                             Attention::GAM, Attention::LAM};
    std::array<double, 6> loss_weights{0.5, 0.5, 0.5, 1.0, 1.0, 1.0};

    // Channel width of decoder block i (1-based): matches its skip E_{7-i}.
    int decoder_channels(int block) const { return encoder_channels[static_cast<std::size_t>(6 - block)]; }
    void validate() const;

    std::string to_json_string() const;
    static NetworkConfig from_json_string(const std::string& text);
};

template <class S>
struct ConvParam {
    Tensor<S> w; // [out, in, kh, kw]
    Tensor<S> b; // [out]
};

template <class S>
struct GamParams {
    ConvParam<S> q;   // 1x1, C -> C
    ConvParam<S> k;   // 1x1, C -> C
    Tensor<S> map_w;  // [C, C] linear fusion of the concatenated heads
    ConvParam<S> out; // 1x1, 2C -> C
};

template <class S>
struct LamParams {
    ConvParam<S> out; // 1x1, 2C -> C
};

// Global self-attention over all spatial positions, multi-head scaled
// dot-product. Query/key come from 1x1 convolutions; the value stream is the
// input itself, split per head. Output keeps the input shape. When
// `attn_out` is given it receives one [HW x HW] softmax matrix per head.
template <class S>
Tensor<S> gam_forward(const GamParams<S>& p, const Tensor<S>& d_i1, int heads,
                      std::vector<std::vector<S>>* attn_out = nullptr) {
    if (d_i1.ndim() != 3)
        throw ArgumentError("argument error: gam input must be [C,H,W], got " + shape_str(d_i1.shape()));
    const int c = d_i1.dim(0), h = d_i1.dim(1), w = d_i1.dim(2);
    if (heads < 1 || c % heads != 0)
        throw ArgumentError("argument error: gam heads " + std::to_string(heads) +
                            " must divide channel width " + std::to_string(c));
    const int ch = c / heads;
    const int hw = h * w;
    const S inv_sqrt_d = static_cast<S>(1.0 / std::sqrt(static_cast<double>(ch)));

    const Tensor<S> q = conv2d(d_i1, p.q.w, p.q.b);
    const Tensor<S> k = conv2d(d_i1, p.k.w, p.k.b);
    if (attn_out) attn_out->clear();

    std::vector<Tensor<S>> head_outs;
    head_outs.reserve(static_cast<std::size_t>(heads));
    for (int j = 0; j < heads; ++j) {
        const Tensor<S> qj = reshape(slice(q, 0, j * ch, ch), {ch, hw});
        const Tensor<S> kj = reshape(slice(k, 0, j * ch, ch), {ch, hw});
        const Tensor<S> vj = reshape(slice(d_i1, 0, j * ch, ch), {ch, hw});
        const Tensor<S> logits = scale(matmul(transpose(qj), kj), inv_sqrt_d); // [HW, HW]
        const Tensor<S> attn = softmax(logits, 1);
        if (attn_out) attn_out->push_back(attn.values());
        const Tensor<S> oj = matmul(attn, transpose(vj)); // [HW, ch]
        head_outs.push_back(reshape(transpose(oj), {ch, h, w}));
    }
    const Tensor<S> heads_cat = concat(head_outs, 0); // [C,H,W]
    const Tensor<S> mapped = matmul(transpose(reshape(heads_cat, {c, hw})), p.map_w); // [HW, C]
    const Tensor<S> d_i2 = reshape(transpose(mapped), {c, h, w});
    return conv2d(concat(std::vector<Tensor<S>>{d_i1, d_i2}, 0), p.out.w, p.out.b);
}

// Local windowed self-attention (weighted neighborhood average) followed by
// the same concat + 1x1 fusion as the global module. `attn_out` receives the
// per-center window weights; `d_i2_out` the pre-fusion contextual feature.
template <class S>
Tensor<S> lam_forward(const LamParams<S>& p, const Tensor<S>& d_i1, int wh, int ww,
                      std::vector<S>* attn_out = nullptr, Tensor<S>* d_i2_out = nullptr) {
    const Tensor<S> d_i2 = local_attention(d_i1, wh, ww, attn_out);
    if (d_i2_out) *d_i2_out = d_i2;
    return conv2d(concat(std::vector<Tensor<S>>{d_i1, d_i2}, 0), p.out.w, p.out.b);
}

// Nearest-neighbor downsample of a binary label, half-pixel convention.
template <class S>
std::vector<S> resize_mask_nearest(const BinaryMask& mask, int out_h, int out_w) {
    std::vector<S> out(static_cast<std::size_t>(out_h) * out_w);
    for (int r = 0; r < out_h; ++r) {
        const int sr = std::min(static_cast<int>((r + 0.5) * mask.height / out_h), mask.height - 1);
        for (int c = 0; c < out_w; ++c) {
            const int sc = std::min(static_cast<int>((c + 0.5) * mask.width / out_w), mask.width - 1);
            out[static_cast<std::size_t>(r) * out_w + c] = static_cast<S>(mask.at(sr, sc));
        }
    }
    return out;
}

// Weighted multi-scale cross-entropy: each scale's CE sum is divided by its
// own pixel count, then weighted and summed.
template <class S>
Tensor<S> multi_scale_loss(const std::vector<Tensor<S>>& side_maps, const BinaryMask& label,
                           const std::vector<double>& weights) {
    if (side_maps.empty() || side_maps.size() != weights.size())
        throw ArgumentError("argument error: multi_scale_loss needs one weight per scale");
    const auto& last = side_maps.back();
    if (last.dim(1) != label.height || last.dim(2) != label.width)
        throw ArgumentError("argument error: label " + std::to_string(label.height) + "x" +
                            std::to_string(label.width) + " does not match final map " +
                            shape_str(last.shape()));
    Tensor<S> total;
    for (std::size_t i = 0; i < side_maps.size(); ++i) {
        if (weights[i] <= 0.0) throw ArgumentError("argument error: loss weights must be > 0");
        const auto& s = side_maps[i];
        const auto target = resize_mask_nearest<S>(label, s.dim(1), s.dim(2));
        const Tensor<S> term = scale(bce_mean(s, target), static_cast<S>(weights[i]));
        total = total.valid() ? add(total, term) : term;
    }
    return total;
}

// The detection network: six-block convolutional encoder, six-block decoder
// with skip fusion and alternating local/global attention, and one sigmoid
// score head per decoder block.
template <class S>
class TddNet {
public:
    TddNet(NetworkConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
        cfg_.validate();
        Rng rng(seed);
        for (int i = 0; i < 6; ++i) {
            EncBlock blk;
            blk.pool_stride = i == 0 ? cfg_.spatial_factors[0]
                                     : cfg_.spatial_factors[static_cast<std::size_t>(i)] /
                                           cfg_.spatial_factors[static_cast<std::size_t>(i - 1)];
            blk.dilation = cfg_.dilations[static_cast<std::size_t>(i)];
            const int cin = i == 0 ? cfg_.in_bands : cfg_.encoder_channels[static_cast<std::size_t>(i - 1)];
            const int cout = cfg_.encoder_channels[static_cast<std::size_t>(i)];
            const std::string base = "enc" + std::to_string(i + 1);
            blk.c1 = make_conv(base + ".conv1", cout, cin, 3, rng);
            blk.c2 = make_conv(base + ".conv2", cout, cout, 3, rng);
            enc_.push_back(std::move(blk));
        }
        for (int i = 1; i <= 6; ++i) {
            DecBlock blk;
            const int c = cfg_.decoder_channels(i);
            const std::string base = "dec" + std::to_string(i);
            if (i == 1) {
                blk.fuse = make_conv(base + ".fuse", c, c, 1, rng);
            } else {
                const int c_prev = cfg_.decoder_channels(i - 1);
                if (c_prev != c) {
                    blk.has_proj = true;
                    blk.proj = make_conv(base + ".proj", c, c_prev, 1, rng);
                }
                blk.fuse = make_conv(base + ".fuse", c, 2 * c, 1, rng);
            }
            if (i <= 5) {
                blk.kind = cfg_.attention_order[static_cast<std::size_t>(i - 1)];
                if (blk.kind == Attention::GAM) {
                    blk.gam.q = make_conv(base + ".gam.q", c, c, 1, rng);
                    blk.gam.k = make_conv(base + ".gam.k", c, c, 1, rng);
                    blk.gam.map_w = make_matrix(base + ".gam.map.w", c, c, rng);
                    blk.gam.out = make_conv(base + ".gam.out", c, 2 * c, 1, rng);
                } else {
                    blk.lam.out = make_conv(base + ".lam.out", c, 2 * c, 1, rng);
                }
            }
            blk.has_attention = i <= 5;
            dec_.push_back(std::move(blk));
        }
        for (int i = 1; i <= 6; ++i)
            heads_.push_back(make_conv("head" + std::to_string(i), 1, cfg_.decoder_channels(i), 1, rng));
    }

    const NetworkConfig& config() const { return cfg_; }
    std::vector<NamedParam<S>>& parameters() { return params_; }
    const std::vector<NamedParam<S>>& parameters() const { return params_; }

    void zero_grad() {
        for (auto& p : params_) p.tensor.zero_grad();
    }

    // E1..E6. Each block optionally max-pools (stride per spatial schedule)
    // then applies two conv3x3+relu stages at the block's dilation.
    std::vector<Tensor<S>> encode(const Tensor<S>& patch) const {
        if (patch.ndim() != 3 || patch.dim(0) != cfg_.in_bands)
            throw ArgumentError("argument error: encoder expects " + std::to_string(cfg_.in_bands) +
                                " bands, got input " + shape_str(patch.shape()));
        if (patch.dim(1) < 4 || patch.dim(2) < 4)
            throw ArgumentError("argument error: patch must be at least 4x4, got " + shape_str(patch.shape()));
        std::vector<Tensor<S>> e;
        Tensor<S> cur = patch;
        for (const auto& blk : enc_) {
            if (blk.pool_stride > 1) cur = maxpool2d(cur, blk.pool_stride, blk.pool_stride);
            cur = relu(conv2d(cur, blk.c1.w, blk.c1.b, 1, blk.dilation));
            cur = relu(conv2d(cur, blk.c2.w, blk.c2.b, 1, blk.dilation));
            e.push_back(cur);
        }
        return e;
    }

    // One decoder block: upsample D_{i-1} to the skip's size, project its
    // channels if the widths differ, fuse by 1x1 convolution, then apply the
    // block's attention. Block 1 consumes E6 alone; block 6 skips attention.
    Tensor<S> decode_block(int block, const Tensor<S>* d_prev, const Tensor<S>& e_skip) const {
        const auto& blk = dec_[static_cast<std::size_t>(block - 1)];
        Tensor<S> d_i1;
        if (block == 1 || !d_prev) {
            d_i1 = conv2d(e_skip, blk.fuse.w, blk.fuse.b);
        } else {
            Tensor<S> up = bilinear_resize(*d_prev, e_skip.dim(1), e_skip.dim(2));
            if (blk.has_proj) up = conv2d(up, blk.proj.w, blk.proj.b);
            d_i1 = conv2d(concat(std::vector<Tensor<S>>{up, e_skip}, 0), blk.fuse.w, blk.fuse.b);
        }
        if (!blk.has_attention) return d_i1;
        if (blk.kind == Attention::GAM) return gam_forward(blk.gam, d_i1, cfg_.heads);
        return lam_forward(blk.lam, d_i1, cfg_.lam_window[0], cfg_.lam_window[1]);
    }

    std::vector<Tensor<S>> decode(const std::vector<Tensor<S>>& e) const {
        if (e.size() != 6) throw ArgumentError("argument error: decoder expects 6 encoder maps");
        std::vector<Tensor<S>> d;
        for (int i = 1; i <= 6; ++i) {
            const Tensor<S>& skip = e[static_cast<std::size_t>(6 - i)];
            d.push_back(decode_block(i, i == 1 ? nullptr : &d.back(), skip));
        }
        return d;
    }

    // S1..S6 = sigmoid(conv1x1(D_i)), single channel at each native size.
    std::vector<Tensor<S>> side_outputs(const std::vector<Tensor<S>>& d) const {
        if (d.size() != 6) throw ArgumentError("argument error: side outputs expect 6 decoder maps");
        std::vector<Tensor<S>> s;
        for (int i = 0; i < 6; ++i)
            s.push_back(sigmoid(conv2d(d[static_cast<std::size_t>(i)], heads_[static_cast<std::size_t>(i)].w,
                                       heads_[static_cast<std::size_t>(i)].b)));
        return s;
    }

    std::vector<Tensor<S>> forward(const Tensor<S>& patch) const { return side_outputs(decode(encode(patch))); }

    // Final detection map for one patch.
    Tensor<S> score_map(const Tensor<S>& patch) const { return forward(patch).back(); }

    Tensor<S> loss(const std::vector<Tensor<S>>& side_maps, const BinaryMask& label) const {
        return multi_scale_loss(side_maps, label,
                                std::vector<double>(cfg_.loss_weights.begin(), cfg_.loss_weights.end()));
    }

    const GamParams<S>& gam_params(int block) const { return dec_[static_cast<std::size_t>(block - 1)].gam; }
    const LamParams<S>& lam_params(int block) const { return dec_[static_cast<std::size_t>(block - 1)].lam; }

    std::vector<BundleEntry> export_parameters() const {
        std::vector<BundleEntry> out;
        for (const auto& p : params_) {
            BundleEntry e;
            e.name = p.name;
            e.shape = p.tensor.shape();
            e.values.reserve(p.tensor.values().size());
            for (const S v : p.tensor.values()) e.values.push_back(static_cast<float>(v));
            out.push_back(std::move(e));
        }
        return out;
    }

    // Strict import: entry list must match the parameter inventory exactly.
    void import_parameters(const std::vector<BundleEntry>& entries) {
        if (entries.size() != params_.size())
            throw FormatError("format error: checkpoint holds " + std::to_string(entries.size()) +
                              " tensors, network needs " + std::to_string(params_.size()));
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].name != params_[i].name)
                throw FormatError("format error: checkpoint tensor \"" + entries[i].name +
                                  "\" where \"" + params_[i].name + "\" was expected");
            if (entries[i].shape != params_[i].tensor.shape())
                throw FormatError("format error: checkpoint tensor \"" + entries[i].name + "\" has shape " +
                                  shape_str(entries[i].shape) + ", expected " +
                                  shape_str(params_[i].tensor.shape()));
            auto& dst = params_[i].tensor.values();
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = static_cast<S>(entries[i].values[j]);
        }
    }

private:
    struct EncBlock {
        ConvParam<S> c1, c2;
        int pool_stride = 1;
        int dilation = 1;
    };
    struct DecBlock {
        bool has_proj = false;
        bool has_attention = false;
        ConvParam<S> proj;
        ConvParam<S> fuse;
        Attention kind = Attention::LAM;
        GamParams<S> gam;
        LamParams<S> lam;
    };

    Tensor<S> register_param(const std::string& name, std::vector<int> shape, std::vector<S> values) {
        Tensor<S> t = Tensor<S>::from(std::move(shape), std::move(values), true);
        params_.push_back({name, t});
        return t;
    }

    // fan-in-scaled uniform init, bound sqrt(6/fan_in); zero biases
    ConvParam<S> make_conv(const std::string& name, int cout, int cin, int k, Rng& rng) {
        const double bound = std::sqrt(6.0 / (static_cast<double>(cin) * k * k));
        std::vector<S> w(static_cast<std::size_t>(cout) * cin * k * k);
        for (auto& v : w) v = static_cast<S>(rng.uniform(-bound, bound));
        ConvParam<S> p;
        p.w = register_param(name + ".w", {cout, cin, k, k}, std::move(w));
        p.b = register_param(name + ".b", {cout}, std::vector<S>(static_cast<std::size_t>(cout), S(0)));
        return p;
    }

    Tensor<S> make_matrix(const std::string& name, int rows, int cols, Rng& rng) {
        const double bound = std::sqrt(6.0 / static_cast<double>(rows));
        std::vector<S> w(static_cast<std::size_t>(rows) * cols);
        for (auto& v : w) v = static_cast<S>(rng.uniform(-bound, bound));
        return register_param(name, {rows, cols}, std::move(w));
    }

    NetworkConfig cfg_;
    std::vector<EncBlock> enc_;
    std::vector<DecBlock> dec_;
    std::vector<ConvParam<S>> heads_;
    std::vector<NamedParam<S>> params_;
};

} // namespace tdd
