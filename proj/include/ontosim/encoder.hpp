#pragma once

// Pre-norm transformer encoder over the autodiff tensor. The CLS output row
// is the sequence embedding; an untied linear head produces MLM logits.

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ontosim/autodiff.hpp"
#include "ontosim/errors.hpp"
#include "ontosim/tokenizer.hpp"

namespace ontosim {

struct EncoderConfig {
  int vocab_size = 8192;
  int d_model = 128;
  int n_layers = 4;
  int n_heads = 4;
  int d_ff = 512;
  int max_len = 128;
  double dropout = 0.1;

  void validate() const {
    if (vocab_size <= 0 || d_model <= 0 || n_layers <= 0 || n_heads <= 0 || d_ff <= 0 ||
        max_len <= 0) {
      throw UsageError("encoder config: all dimensions must be positive");
    }
    if (d_model % n_heads != 0) {
      throw UsageError("encoder config: d_model must be divisible by n_heads");
    }
    if (dropout < 0.0 || dropout >= 1.0) {
      throw UsageError("encoder config: dropout must lie in [0, 1)");
    }
  }
};

inline size_t parameter_count(const EncoderConfig& cfg) {
  size_t v = static_cast<size_t>(cfg.vocab_size);
  size_t d = static_cast<size_t>(cfg.d_model);
  size_t ff = static_cast<size_t>(cfg.d_ff);
  size_t per_layer = 2 * d               // ln1
                     + 4 * d * d + 4 * d  // q,k,v,o projections
                     + 2 * d              // ln2
                     + d * ff + ff        // ff in
                     + ff * d + d;        // ff out
  return v * d + static_cast<size_t>(cfg.max_len) * d +
         static_cast<size_t>(cfg.n_layers) * per_layer + 2 * d  // final ln
         + d * v + v;                                            // mlm head
}

template <typename S>
struct ForwardTrace {
  struct Attention {
    size_t seq = 0;
    size_t layer = 0;
    size_t head = 0;
    size_t len = 0;           // padded length (rows/cols of probs)
    std::vector<char> keep;   // 1 for real tokens
    std::vector<S> probs;     // len x len row-major
  };
  std::vector<Attention> attention;
};

template <typename S>
struct EncoderOutput {
  ad::Tensor<S> token_states;  // padded_len x d_model
  ad::Tensor<S> cls;           // 1 x d_model, row 0 of token_states
  size_t true_len = 0;
};

template <typename S>
class Encoder {
 public:
  struct Layer {
    ad::Tensor<S> ln1_g, ln1_b;
    ad::Tensor<S> wq, bq, wk, bk, wv, bv, wo, bo;
    ad::Tensor<S> ln2_g, ln2_b;
    ad::Tensor<S> ff_w1, ff_b1, ff_w2, ff_b2;
  };

  struct ForwardOptions {
    bool train = false;
    std::mt19937_64* rng = nullptr;  // required when train && dropout > 0
    ForwardTrace<S>* trace = nullptr;
  };

  EncoderConfig cfg;
  ad::Tensor<S> tok_emb;   // vocab x d
  ad::Tensor<S> pos_emb;   // max_len x d
  std::vector<Layer> layers;
  ad::Tensor<S> final_g, final_b;
  ad::Tensor<S> mlm_w;     // d x vocab (untied from tok_emb)
  ad::Tensor<S> mlm_b;     // vocab

  static Encoder init(const EncoderConfig& cfg, uint64_t seed, double init_std = 0.02) {
    cfg.validate();
    Encoder enc;
    enc.cfg = cfg;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, init_std);
    auto randn = [&](std::vector<size_t> shape, const std::string& name) {
      size_t n = 1;
      for (size_t dim : shape) n *= dim;
      std::vector<S> v(n);
      for (auto& x : v) x = static_cast<S>(normal(rng));
      auto t = ad::Tensor<S>::from_values(std::move(shape), std::move(v), true);
      t.set_name(name);
      return t;
    };
    auto constant = [&](std::vector<size_t> shape, S value, const std::string& name) {
      auto t = ad::Tensor<S>::filled(std::move(shape), value, true);
      t.set_name(name);
      return t;
    };

    size_t d = static_cast<size_t>(cfg.d_model);
    size_t v = static_cast<size_t>(cfg.vocab_size);
    size_t ff = static_cast<size_t>(cfg.d_ff);
    enc.tok_emb = randn({v, d}, "tok_emb");
    enc.pos_emb = randn({static_cast<size_t>(cfg.max_len), d}, "pos_emb");
    for (int l = 0; l < cfg.n_layers; ++l) {
      std::string p = "layer" + std::to_string(l) + ".";
      Layer layer;
      layer.ln1_g = constant({d}, S(1), p + "ln1_g");
      layer.ln1_b = constant({d}, S(0), p + "ln1_b");
      layer.wq = randn({d, d}, p + "wq");
      layer.bq = constant({d}, S(0), p + "bq");
      layer.wk = randn({d, d}, p + "wk");
      layer.bk = constant({d}, S(0), p + "bk");
      layer.wv = randn({d, d}, p + "wv");
      layer.bv = constant({d}, S(0), p + "bv");
      layer.wo = randn({d, d}, p + "wo");
      layer.bo = constant({d}, S(0), p + "bo");
      layer.ln2_g = constant({d}, S(1), p + "ln2_g");
      layer.ln2_b = constant({d}, S(0), p + "ln2_b");
      layer.ff_w1 = randn({d, ff}, p + "ff_w1");
      layer.ff_b1 = constant({ff}, S(0), p + "ff_b1");
      layer.ff_w2 = randn({ff, d}, p + "ff_w2");
      layer.ff_b2 = constant({d}, S(0), p + "ff_b2");
      enc.layers.push_back(std::move(layer));
    }
    enc.final_g = constant({d}, S(1), "final_g");
    enc.final_b = constant({d}, S(0), "final_b");
    enc.mlm_w = randn({d, v}, "mlm_w");
    enc.mlm_b = constant({v}, S(0), "mlm_b");
    return enc;
  }

  std::vector<std::pair<std::string, ad::Tensor<S>>> named_parameters() const {
    std::vector<std::pair<std::string, ad::Tensor<S>>> out;
    auto push = [&](const ad::Tensor<S>& t) { out.emplace_back(t.name(), t); };
    push(tok_emb);
    push(pos_emb);
    for (const auto& l : layers) {
      push(l.ln1_g); push(l.ln1_b);
      push(l.wq); push(l.bq); push(l.wk); push(l.bk);
      push(l.wv); push(l.bv); push(l.wo); push(l.bo);
      push(l.ln2_g); push(l.ln2_b);
      push(l.ff_w1); push(l.ff_b1); push(l.ff_w2); push(l.ff_b2);
    }
    push(final_g); push(final_b);
    push(mlm_w); push(mlm_b);
    return out;
  }

  size_t num_parameters() const {
    size_t n = 0;
    for (const auto& [name, t] : named_parameters()) {
      (void)name;
      n += t.numel();
    }
    return n;
  }

  Encoder clone() const {
    Encoder fresh = *this;
    // rebuild every parameter as an independent leaf with the same values
    auto dup = [](const ad::Tensor<S>& t) {
      auto c = ad::Tensor<S>::from_values(t.shape(), t.values(), true);
      c.set_name(t.name());
      return c;
    };
    fresh.tok_emb = dup(tok_emb);
    fresh.pos_emb = dup(pos_emb);
    for (size_t l = 0; l < layers.size(); ++l) {
      Layer& out = fresh.layers[l];
      const Layer& in = layers[l];
      out.ln1_g = dup(in.ln1_g); out.ln1_b = dup(in.ln1_b);
      out.wq = dup(in.wq); out.bq = dup(in.bq);
      out.wk = dup(in.wk); out.bk = dup(in.bk);
      out.wv = dup(in.wv); out.bv = dup(in.bv);
      out.wo = dup(in.wo); out.bo = dup(in.bo);
      out.ln2_g = dup(in.ln2_g); out.ln2_b = dup(in.ln2_b);
      out.ff_w1 = dup(in.ff_w1); out.ff_b1 = dup(in.ff_b1);
      out.ff_w2 = dup(in.ff_w2); out.ff_b2 = dup(in.ff_b2);
    }
    fresh.final_g = dup(final_g);
    fresh.final_b = dup(final_b);
    fresh.mlm_w = dup(mlm_w);
    fresh.mlm_b = dup(mlm_b);
    return fresh;
  }

  // Pads the batch to a common length, masks padded keys out of attention,
  // and runs every sequence through the stack.
  std::vector<EncoderOutput<S>> forward(const std::vector<std::vector<int>>& batch,
                                        const ForwardOptions& opts = {}) const {
    if (batch.empty()) throw DataError("forward: empty batch");
    bool drop = opts.train && cfg.dropout > 0.0;
    if (drop && opts.rng == nullptr) {
      throw UsageError("forward: training mode with dropout needs an rng");
    }
    size_t padded = 0;
    for (const auto& ids : batch) {
      if (ids.size() > static_cast<size_t>(cfg.max_len)) {
        throw DataError("forward: sequence longer than max_len");
      }
      for (int id : ids) {
        if (id < 0 || id >= cfg.vocab_size) {
          throw DataError("forward: token id out of range: " + std::to_string(id));
        }
      }
      padded = std::max(padded, ids.size());
    }

    size_t dh = static_cast<size_t>(cfg.d_model / cfg.n_heads);
    S inv_sqrt_dh = S(1) / std::sqrt(static_cast<S>(dh));
    std::vector<EncoderOutput<S>> outputs;
    outputs.reserve(batch.size());

    for (size_t b = 0; b < batch.size(); ++b) {
      std::vector<int> ids = batch[b];
      std::vector<char> keep(padded, 1);
      for (size_t i = ids.size(); i < padded; ++i) keep[i] = 0;
      size_t true_len = ids.size();
      ids.resize(padded, TokenizerModel::kPad);

      std::vector<size_t> tok_idx(ids.begin(), ids.end());
      std::vector<size_t> pos_idx(padded);
      for (size_t i = 0; i < padded; ++i) pos_idx[i] = i;

      auto x = ad::add(ad::gather_rows(tok_emb, tok_idx), ad::gather_rows(pos_emb, pos_idx));
      x = ad::dropout(x, cfg.dropout, drop ? *opts.rng : dummy_rng(), drop);

      for (size_t li = 0; li < layers.size(); ++li) {
        const Layer& layer = layers[li];
        auto normed = ad::layer_norm_rows(x, layer.ln1_g, layer.ln1_b);
        auto q = ad::add_rowvec(ad::matmul(normed, layer.wq), layer.bq);
        auto k = ad::add_rowvec(ad::matmul(normed, layer.wk), layer.bk);
        auto v = ad::add_rowvec(ad::matmul(normed, layer.wv), layer.bv);

        std::vector<ad::Tensor<S>> heads;
        for (int h = 0; h < cfg.n_heads; ++h) {
          auto qh = ad::slice_cols(q, static_cast<size_t>(h) * dh, dh);
          auto kh = ad::slice_cols(k, static_cast<size_t>(h) * dh, dh);
          auto vh = ad::slice_cols(v, static_cast<size_t>(h) * dh, dh);
          auto scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt_dh);
          auto probs = ad::softmax_rows(scores, &keep);
          if (opts.trace != nullptr) {
            opts.trace->attention.push_back({b, li, static_cast<size_t>(h), padded, keep,
                                             probs.values()});
          }
          heads.push_back(ad::matmul(probs, vh));
        }
        auto ctx = cfg.n_heads == 1 ? heads[0] : ad::concat_cols(heads);
        auto attn_out = ad::add_rowvec(ad::matmul(ctx, layer.wo), layer.bo);
        attn_out = ad::dropout(attn_out, cfg.dropout, drop ? *opts.rng : dummy_rng(), drop);
        x = ad::add(x, attn_out);

        auto normed2 = ad::layer_norm_rows(x, layer.ln2_g, layer.ln2_b);
        auto hidden = ad::relu(ad::add_rowvec(ad::matmul(normed2, layer.ff_w1), layer.ff_b1));
        auto ff_out = ad::add_rowvec(ad::matmul(hidden, layer.ff_w2), layer.ff_b2);
        ff_out = ad::dropout(ff_out, cfg.dropout, drop ? *opts.rng : dummy_rng(), drop);
        x = ad::add(x, ff_out);
      }

      auto states = ad::layer_norm_rows(x, final_g, final_b);
      EncoderOutput<S> out;
      out.token_states = states;
      out.cls = ad::slice_rows(states, 0, 1);
      out.true_len = true_len;
      outputs.push_back(std::move(out));
    }
    return outputs;
  }

  // Vocabulary logits for every token position.
  ad::Tensor<S> mlm_logits(const ad::Tensor<S>& token_states) const {
    return ad::add_rowvec(ad::matmul(token_states, mlm_w), mlm_b);
  }

  // Stacks the per-sequence CLS rows into one (batch x d_model) matrix.
  static ad::Tensor<S> cls_matrix(const std::vector<EncoderOutput<S>>& outputs) {
    std::vector<ad::Tensor<S>> rows;
    rows.reserve(outputs.size());
    for (const auto& o : outputs) rows.push_back(o.cls);
    return ad::concat_rows(rows);
  }

 private:
  static std::mt19937_64& dummy_rng() {
    static std::mt19937_64 rng(0);
    return rng;
  }
};

}  // namespace ontosim
