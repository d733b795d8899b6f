#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "vhd/gradcheck.hpp"
#include "vhd/rng.hpp"
#include "vhd/tape.hpp"
#include "vhd/tensor.hpp"

namespace vhd {

enum class Variant { kFull, kVisualOnly, kAudioOnly, kConcatAV };
enum class Mode { kTrain, kEval };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct ModelConfig {
  int d = 256;
  int d_k = 512;
  int d_v = 512;
  int n_layers = 2;
  int heads = 8;
  double dropout = 0.5;
  int d_in_visual = 0;
  int d_in_audio = 0;
  bool positional_encoding = false;
  std::array<double, 3> fusion_weights{1.0 / 3, 1.0 / 3, 1.0 / 3};
  Variant variant = Variant::kFull;

  void validate() const;
};

struct AttentionParams {
  Tensor w_q;  // {d_k, d}
  Tensor w_k;  // {d_k, d}
  Tensor w_s;  // {d_v, d}, value projection
  Tensor w_o;  // {d, d_v}, output projection back to model width
  int heads = 8;
};

struct LinearParams {
  Tensor w;  // {out, in}
  Tensor b;  // {out}
};

struct FfnParams {
  Tensor w1, b1;  // d -> d_ff
  Tensor w2, b2;  // d_ff -> d
};

struct NormParams {
  Tensor gamma, beta;
};

struct EncoderLayerParams {
  AttentionParams attn;
  FfnParams ffn;
  NormParams norm1, norm2;
};

// Linear -> ReLU -> Dropout -> Linear, one logit per row.
struct HeadParams {
  Tensor w1, b1;
  Tensor w2, b2;
};

// One modality pipeline: input projection, encoder stack, learned global
// query plus its decoder block.
struct StreamParams {
  LinearParams proj;
  std::vector<EncoderLayerParams> encoder;
  Tensor g_init;  // {d}
  EncoderLayerParams global_dec;
};

struct ModelParams {
  Variant variant = Variant::kFull;
  std::optional<StreamParams> visual;
  std::optional<StreamParams> audio;
  std::optional<StreamParams> joint;  // concat_av single stream
  std::optional<AttentionParams> cooc_v;
  std::optional<AttentionParams> cooc_a;
  std::optional<HeadParams> head_tilde;
  std::optional<HeadParams> head_v;
  std::optional<HeadParams> head_a;

  static ModelParams init(const ModelConfig& cfg, Rng rng);
  static ModelParams from_map(const ModelConfig& cfg, const ParamMap& map);
  ParamMap to_map() const;

  // Visits every tensor as (name, Tensor&) in a fixed deterministic order.
  template <class F>
  void for_each(F&& f) {
    for_each_impl(*this, f);
  }
  template <class F>
  void for_each(F&& f) const {
    for_each_impl(*this, f);
  }

 private:
  template <class Self, class F>
  static void for_each_impl(Self& self, F& f);
};

enum class Head { kTilde, kVisual, kAudio };

struct ModelOutput {
  Tensor y_tilde;  // {T} logits from the co-occurrence head
  Tensor y_v;      // {T} logits from the visual head
  Tensor y_a;      // {T} logits from the audio head
  Tensor y_fused;  // {T} weighted sum of the active scores
  Tensor f_hat;    // {T, 2d} aggregated embeddings ({T, d} for single-stream variants)
  Tensor f_hat_v, f_hat_a;    // encoder outputs plus global context
  Tensor f_cooc_v, f_cooc_a;  // co-occurrence representations
  Tensor g_v, g_a;            // global context vectors {d}
  std::vector<Head> active;   // heads that carry real scores for this variant
};

Tensor multi_head_attention(Tape& tape, const Tensor& q_in, const Tensor& kv_in,
                            const AttentionParams& p);
Tensor encoder_layer(Tape& tape, const Tensor& f, const EncoderLayerParams& p, double dropout,
                     Mode mode, RngCursor& streams);
Tensor intra_modality_encode(Tape& tape, const Tensor& f,
                             const std::vector<EncoderLayerParams>& layers, double dropout,
                             Mode mode, RngCursor& streams, bool positional_encoding);
Tensor global_context_decode(Tape& tape, const Tensor& f_n, const Tensor& g_init,
                             const EncoderLayerParams& p, double dropout, Mode mode,
                             RngCursor& streams);
std::pair<Tensor, Tensor> cooccurrence_encode(Tape& tape, const Tensor& f_v, const Tensor& f_a,
                                              const AttentionParams& pv,
                                              const AttentionParams& pa);
Tensor score_head(Tape& tape, const Tensor& f, const HeadParams& p, double dropout, Mode mode,
                  RngCursor& streams);

ModelOutput model_forward(Tape& tape, const Tensor& v_feats, const Tensor& a_feats,
                          const ModelParams& params, const ModelConfig& cfg, Mode mode,
                          Rng dropout_stream = Rng(0));

// Copy of `params` with every tensor registered on the tape, plus the
// gradient map extraction that mirrors it.
ModelParams bind_params(Tape& tape, const ModelParams& params);
ParamMap collect_grads(const Tape& tape, const ModelParams& bound);

template <class Self, class F>
void ModelParams::for_each_impl(Self& self, F& f) {
  const auto visit_attention = [&f](auto& p, const std::string& prefix) {
    f(prefix + ".w_q", p.w_q);
    f(prefix + ".w_k", p.w_k);
    f(prefix + ".w_s", p.w_s);
    f(prefix + ".w_o", p.w_o);
  };
  const auto visit_ffn = [&f](auto& p, const std::string& prefix) {
    f(prefix + ".w1", p.w1);
    f(prefix + ".b1", p.b1);
    f(prefix + ".w2", p.w2);
    f(prefix + ".b2", p.b2);
  };
  const auto visit_norm = [&f](auto& p, const std::string& prefix) {
    f(prefix + ".gamma", p.gamma);
    f(prefix + ".beta", p.beta);
  };
  const auto visit_layer = [&](auto& p, const std::string& prefix) {
    visit_attention(p.attn, prefix + ".attn");
    visit_ffn(p.ffn, prefix + ".ffn");
    visit_norm(p.norm1, prefix + ".norm1");
    visit_norm(p.norm2, prefix + ".norm2");
  };
  const auto visit_stream = [&](auto& s, const std::string& prefix) {
    f(prefix + ".proj.w", s.proj.w);
    f(prefix + ".proj.b", s.proj.b);
    for (std::size_t i = 0; i < s.encoder.size(); ++i) {
      visit_layer(s.encoder[i], prefix + ".enc" + std::to_string(i));
    }
    f(prefix + ".g_init", s.g_init);
    visit_layer(s.global_dec, prefix + ".gdec");
  };
  const auto visit_head = [&f](auto& p, const std::string& prefix) {
    f(prefix + ".w1", p.w1);
    f(prefix + ".b1", p.b1);
    f(prefix + ".w2", p.w2);
    f(prefix + ".b2", p.b2);
  };

  if (self.visual) visit_stream(*self.visual, "visual");
  if (self.audio) visit_stream(*self.audio, "audio");
  if (self.joint) visit_stream(*self.joint, "joint");
  if (self.cooc_v) visit_attention(*self.cooc_v, "cooc_v");
  if (self.cooc_a) visit_attention(*self.cooc_a, "cooc_a");
  if (self.head_tilde) visit_head(*self.head_tilde, "head_tilde");
  if (self.head_v) visit_head(*self.head_v, "head_v");
  if (self.head_a) visit_head(*self.head_a, "head_a");
}

}  // namespace vhd
