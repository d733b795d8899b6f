#include "vhd/model.hpp"

#include <cmath>

#include "vhd/losses.hpp"
#include "vhd/ops.hpp"

namespace vhd {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kVisualOnly: return "visual_only";
    case Variant::kAudioOnly: return "audio_only";
    case Variant::kConcatAV: return "concat_av";
  }
  throw ConfigError("unknown variant");
}

Variant variant_from_name(const std::string& name) {
  if (name == "full") return Variant::kFull;
  if (name == "visual_only") return Variant::kVisualOnly;
  if (name == "audio_only") return Variant::kAudioOnly;
  if (name == "concat_av") return Variant::kConcatAV;
  throw ConfigError("unknown variant '" + name +
                    "' (expected full, visual_only, audio_only or concat_av)");
}

void ModelConfig::validate() const {
  if (d < 1 || d_k < 1 || d_v < 1 || n_layers < 1 || heads < 1) {
    throw ConfigError("model config: dims, layers and heads must be positive");
  }
  if (d_k % heads != 0 || d_v % heads != 0) {
    throw ConfigError("model config: d_k and d_v must be divisible by heads (" +
                      std::to_string(d_k) + ", " + std::to_string(d_v) + " vs " +
                      std::to_string(heads) + " heads)");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ConfigError("model config: dropout must be in [0, 1)");
  }
  const bool needs_visual = variant != Variant::kAudioOnly;
  const bool needs_audio = variant != Variant::kVisualOnly;
  if (needs_visual && d_in_visual < 1) {
    throw ConfigError("model config: d_in_visual must be positive for variant " +
                      variant_name(variant));
  }
  if (needs_audio && d_in_audio < 1) {
    throw ConfigError("model config: d_in_audio must be positive for variant " +
                      variant_name(variant));
  }
  double wsum = 0.0;
  for (double w : fusion_weights) {
    if (w < 0.0) throw ConfigError("model config: fusion weights must be nonnegative");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-9) {
    throw ConfigError("model config: fusion weights must sum to 1, got " + std::to_string(wsum));
  }
}

namespace {

Tensor xavier_uniform(int out_dim, int in_dim, Rng rng) {
  const double limit = std::sqrt(6.0 / (in_dim + out_dim));
  return Tensor::rand_uniform({out_dim, in_dim}, rng, -limit, limit);
}

AttentionParams init_attention(const ModelConfig& cfg, Rng rng) {
  AttentionParams p;
  p.heads = cfg.heads;
  p.w_q = xavier_uniform(cfg.d_k, cfg.d, rng.split(0));
  p.w_k = xavier_uniform(cfg.d_k, cfg.d, rng.split(1));
  p.w_s = xavier_uniform(cfg.d_v, cfg.d, rng.split(2));
  p.w_o = xavier_uniform(cfg.d, cfg.d_v, rng.split(3));
  return p;
}

EncoderLayerParams init_layer(const ModelConfig& cfg, Rng rng) {
  EncoderLayerParams p;
  p.attn = init_attention(cfg, rng.split(0));
  const int d_ff = 4 * cfg.d;
  p.ffn.w1 = xavier_uniform(d_ff, cfg.d, rng.split(1));
  p.ffn.b1 = Tensor::zeros({d_ff});
  p.ffn.w2 = xavier_uniform(cfg.d, d_ff, rng.split(2));
  p.ffn.b2 = Tensor::zeros({cfg.d});
  p.norm1.gamma = Tensor::full({cfg.d}, 1.0);
  p.norm1.beta = Tensor::zeros({cfg.d});
  p.norm2.gamma = Tensor::full({cfg.d}, 1.0);
  p.norm2.beta = Tensor::zeros({cfg.d});
  return p;
}

StreamParams init_stream(const ModelConfig& cfg, int d_in, Rng rng) {
  StreamParams s;
  s.proj.w = xavier_uniform(cfg.d, d_in, rng.split(0));
  s.proj.b = Tensor::zeros({cfg.d});
  for (int i = 0; i < cfg.n_layers; ++i) {
    s.encoder.push_back(init_layer(cfg, rng.split(10 + static_cast<std::uint64_t>(i))));
  }
  Rng grng = rng.split(1);
  s.g_init = Tensor::rand_gaussian({cfg.d}, grng, 0.0, 0.02);
  s.global_dec = init_layer(cfg, rng.split(2));
  return s;
}

HeadParams init_head(const ModelConfig& cfg, int d_in, Rng rng) {
  HeadParams p;
  const int d_h = cfg.d;
  p.w1 = xavier_uniform(d_h, d_in, rng.split(0));
  p.b1 = Tensor::zeros({d_h});
  p.w2 = xavier_uniform(1, d_h, rng.split(1));
  p.b2 = Tensor::zeros({1});
  return p;
}

Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
  return add_row_broadcast(tape, matmul_nt(tape, x, w), b);
}

Tensor ffn_forward(Tape& tape, const Tensor& x, const FfnParams& p) {
  const Tensor hidden = relu(tape, linear(tape, x, p.w1, p.b1));
  return linear(tape, hidden, p.w2, p.b2);
}

// Post-norm residual block shared by the encoder layers and the global
// decoder: x1 = LN(x + drop(sublayer)); out = LN(x1 + drop(FFN(x1))).
Tensor residual_block(Tape& tape, const Tensor& x, const Tensor& sublayer,
                      const EncoderLayerParams& p, double dropout, Mode mode,
                      RngCursor& streams) {
  const bool training = mode == Mode::kTrain;
  const Tensor d1 = seeded_dropout(tape, sublayer, dropout, streams.next(), training);
  const Tensor x1 = layer_norm(tape, add(tape, x, d1), p.norm1.gamma, p.norm1.beta);
  const Tensor f = ffn_forward(tape, x1, p.ffn);
  const Tensor d2 = seeded_dropout(tape, f, dropout, streams.next(), training);
  return layer_norm(tape, add(tape, x1, d2), p.norm2.gamma, p.norm2.beta);
}

void check_input(const Tensor& feats, int expected_dim, const char* stream_name) {
  if (feats.rank() != 2) {
    throw ShapeError(std::string(stream_name) + " features must be rank-2, got " +
                     shape_str(feats.shape()));
  }
  if (feats.rows() < 1) throw DataError(std::string(stream_name) + ": empty sequence");
  if (feats.cols() != expected_dim) {
    throw ShapeError(std::string(stream_name) + " feature width " +
                     std::to_string(feats.cols()) + " does not match configured input dim " +
                     std::to_string(expected_dim));
  }
  if (!all_finite(feats)) {
    throw DataError(std::string(stream_name) + " features contain NaN or Inf");
  }
}

struct StreamOutputs {
  Tensor encoded;  // F_n, {T, d}
  Tensor g;        // global context {d}
  Tensor f_hat;    // F_n + g, {T, d}
};

StreamOutputs run_stream(Tape& tape, const Tensor& feats, const StreamParams& s,
                         const ModelConfig& cfg, Mode mode, RngCursor& streams) {
  StreamOutputs out;
  const Tensor projected = linear(tape, feats, s.proj.w, s.proj.b);
  out.encoded = intra_modality_encode(tape, projected, s.encoder, cfg.dropout, mode, streams,
                                      cfg.positional_encoding);
  out.g = global_context_decode(tape, out.encoded, s.g_init, s.global_dec, cfg.dropout, mode,
                                streams);
  out.f_hat = add_row_broadcast(tape, out.encoded, out.g);
  return out;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, Rng rng) {
  cfg.validate();
  ModelParams p;
  p.variant = cfg.variant;
  switch (cfg.variant) {
    case Variant::kFull:
      p.visual = init_stream(cfg, cfg.d_in_visual, rng.split(0));
      p.audio = init_stream(cfg, cfg.d_in_audio, rng.split(1));
      p.cooc_v = init_attention(cfg, rng.split(2));
      p.cooc_a = init_attention(cfg, rng.split(3));
      p.head_tilde = init_head(cfg, 2 * cfg.d, rng.split(4));
      p.head_v = init_head(cfg, cfg.d, rng.split(5));
      p.head_a = init_head(cfg, cfg.d, rng.split(6));
      break;
    case Variant::kVisualOnly:
      p.visual = init_stream(cfg, cfg.d_in_visual, rng.split(0));
      p.head_v = init_head(cfg, cfg.d, rng.split(5));
      break;
    case Variant::kAudioOnly:
      p.audio = init_stream(cfg, cfg.d_in_audio, rng.split(1));
      p.head_a = init_head(cfg, cfg.d, rng.split(6));
      break;
    case Variant::kConcatAV:
      p.joint = init_stream(cfg, cfg.d_in_visual + cfg.d_in_audio, rng.split(0));
      p.head_tilde = init_head(cfg, cfg.d, rng.split(4));
      break;
  }
  return p;
}

ParamMap ModelParams::to_map() const {
  ParamMap map;
  for_each([&map](const std::string& name, const Tensor& t) { map.emplace(name, t); });
  return map;
}

ModelParams ModelParams::from_map(const ModelConfig& cfg, const ParamMap& map) {
  ModelParams p = init(cfg, Rng(0));
  std::size_t used = 0;
  p.for_each([&](const std::string& name, Tensor& t) {
    const auto it = map.find(name);
    if (it == map.end()) throw DataError("parameter map missing tensor '" + name + "'");
    if (it->second.shape() != t.shape()) {
      throw ShapeError("parameter '" + name + "' has shape " + shape_str(it->second.shape()) +
                       ", expected " + shape_str(t.shape()));
    }
    t = it->second;
    ++used;
  });
  if (used != map.size()) {
    throw DataError("parameter map holds " + std::to_string(map.size()) + " tensors; model uses " +
                    std::to_string(used));
  }
  return p;
}

ModelParams bind_params(Tape& tape, const ModelParams& params) {
  ModelParams bound = params;
  bound.for_each([&tape](const std::string&, Tensor& t) { t = tape.watch(t); });
  return bound;
}

ParamMap collect_grads(const Tape& tape, const ModelParams& bound) {
  ParamMap grads;
  bound.for_each(
      [&](const std::string& name, const Tensor& t) { grads.emplace(name, tape.grad(t)); });
  return grads;
}

Tensor multi_head_attention(Tape& tape, const Tensor& q_in, const Tensor& kv_in,
                            const AttentionParams& p) {
  const int d = q_in.cols();
  const int d_k = p.w_q.rows(), d_v = p.w_s.rows();
  if (kv_in.cols() != d) {
    throw ShapeError("multi_head_attention: query width " + shape_str(q_in.shape()) +
                     " vs key/value width " + shape_str(kv_in.shape()));
  }
  if (p.w_q.cols() != d || p.w_k.cols() != d || p.w_s.cols() != d || p.w_o.cols() != d_v ||
      p.w_k.rows() != d_k) {
    throw ShapeError("multi_head_attention: projection shapes do not match input width " +
                     std::to_string(d));
  }
  if (d_k % p.heads != 0 || d_v % p.heads != 0) {
    throw ShapeError("multi_head_attention: d_k and d_v must be divisible by heads");
  }
  const int dk_h = d_k / p.heads, dv_h = d_v / p.heads;

  const Tensor q = matmul_nt(tape, q_in, p.w_q);   // {Tq, d_k}
  const Tensor k = matmul_nt(tape, kv_in, p.w_k);  // {Tkv, d_k}
  const Tensor s = matmul_nt(tape, kv_in, p.w_s);  // {Tkv, d_v}

  std::vector<Tensor> head_outputs;
  head_outputs.reserve(static_cast<std::size_t>(p.heads));
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dk_h));
  for (int h = 0; h < p.heads; ++h) {
    const Tensor qh = slice_cols(tape, q, h * dk_h, (h + 1) * dk_h);
    const Tensor kh = slice_cols(tape, k, h * dk_h, (h + 1) * dk_h);
    const Tensor sh = slice_cols(tape, s, h * dv_h, (h + 1) * dv_h);
    const Tensor attn = softmax_rows(tape, scale(tape, matmul_nt(tape, qh, kh), inv_scale));
    head_outputs.push_back(matmul(tape, attn, sh));
  }
  const Tensor concat = concat_cols(tape, head_outputs);  // {Tq, d_v}
  return matmul_nt(tape, concat, p.w_o);                  // {Tq, d}
}

Tensor encoder_layer(Tape& tape, const Tensor& f, const EncoderLayerParams& p, double dropout,
                     Mode mode, RngCursor& streams) {
  const Tensor attended = multi_head_attention(tape, f, f, p.attn);
  return residual_block(tape, f, attended, p, dropout, mode, streams);
}

Tensor intra_modality_encode(Tape& tape, const Tensor& f,
                             const std::vector<EncoderLayerParams>& layers, double dropout,
                             Mode mode, RngCursor& streams, bool positional_encoding) {
  if (layers.empty()) throw ContractError("intra_modality_encode: need at least one layer");
  Tensor x = f;
  if (positional_encoding) {
    x = add(tape, x, sinusoidal_positional_encoding(f.rows(), f.cols()));
  }
  for (const EncoderLayerParams& layer : layers) {
    x = encoder_layer(tape, x, layer, dropout, mode, streams);
  }
  return x;
}

Tensor global_context_decode(Tape& tape, const Tensor& f_n, const Tensor& g_init,
                             const EncoderLayerParams& p, double dropout, Mode mode,
                             RngCursor& streams) {
  const int d = f_n.cols();
  if (g_init.rank() != 1 || g_init.dim(0) != d) {
    throw ShapeError("global_context_decode: g_init " + shape_str(g_init.shape()) +
                     " does not match feature width " + std::to_string(d));
  }
  const Tensor query = reshape(tape, g_init, {1, d});
  const Tensor attended = multi_head_attention(tape, query, f_n, p.attn);
  const Tensor refined = residual_block(tape, query, attended, p, dropout, mode, streams);
  return reshape(tape, refined, {d});
}

std::pair<Tensor, Tensor> cooccurrence_encode(Tape& tape, const Tensor& f_v, const Tensor& f_a,
                                              const AttentionParams& pv,
                                              const AttentionParams& pa) {
  if (f_v.rows() != f_a.rows()) {
    throw ShapeError("cooccurrence_encode: sequence lengths differ: " + shape_str(f_v.shape()) +
                     " vs " + shape_str(f_a.shape()));
  }
  // visual rows first, then audio rows
  const Tensor f_va = concat_rows(tape, f_v, f_a);  // {2T, d}
  const Tensor cv = multi_head_attention(tape, f_v, f_va, pv);
  const Tensor ca = multi_head_attention(tape, f_a, f_va, pa);
  return {cv, ca};
}

Tensor score_head(Tape& tape, const Tensor& f, const HeadParams& p, double dropout, Mode mode,
                  RngCursor& streams) {
  const Tensor hidden = relu(tape, linear(tape, f, p.w1, p.b1));
  const Tensor dropped =
      seeded_dropout(tape, hidden, dropout, streams.next(), mode == Mode::kTrain);
  const Tensor logits = linear(tape, dropped, p.w2, p.b2);  // {T, 1}
  return reshape(tape, logits, {f.rows()});
}

ModelOutput model_forward(Tape& tape, const Tensor& v_feats, const Tensor& a_feats,
                          const ModelParams& params, const ModelConfig& cfg, Mode mode,
                          Rng dropout_stream) {
  cfg.validate();
  if (params.variant != cfg.variant) {
    throw ConfigError("model_forward: parameter variant " + variant_name(params.variant) +
                      " does not match config variant " + variant_name(cfg.variant));
  }
  RngCursor streams{dropout_stream, 0};
  ModelOutput out;

  switch (cfg.variant) {
    case Variant::kFull: {
      check_input(v_feats, cfg.d_in_visual, "visual");
      check_input(a_feats, cfg.d_in_audio, "audio");
      if (v_feats.rows() != a_feats.rows()) {
        throw ShapeError("model_forward: visual and audio sequence lengths differ: " +
                         shape_str(v_feats.shape()) + " vs " + shape_str(a_feats.shape()));
      }
      const StreamOutputs vs = run_stream(tape, v_feats, *params.visual, cfg, mode, streams);
      const StreamOutputs as = run_stream(tape, a_feats, *params.audio, cfg, mode, streams);
      auto [cv, ca] =
          cooccurrence_encode(tape, vs.encoded, as.encoded, *params.cooc_v, *params.cooc_a);

      out.g_v = vs.g;
      out.g_a = as.g;
      out.f_hat_v = vs.f_hat;
      out.f_hat_a = as.f_hat;
      out.f_cooc_v = cv;
      out.f_cooc_a = ca;

      const Tensor fused_features = concat_cols(tape, cv, ca);  // {T, 2d}
      out.y_tilde = score_head(tape, fused_features, *params.head_tilde, cfg.dropout, mode,
                               streams);
      out.y_v = score_head(tape, vs.f_hat, *params.head_v, cfg.dropout, mode, streams);
      out.y_a = score_head(tape, as.f_hat, *params.head_a, cfg.dropout, mode, streams);
      const auto& w = cfg.fusion_weights;
      out.y_fused = add(tape, add(tape, scale(tape, out.y_tilde, w[0]),
                                  scale(tape, out.y_v, w[1])),
                        scale(tape, out.y_a, w[2]));
      out.f_hat = aggregate_embeddings(tape, vs.f_hat, cv, as.f_hat, ca);
      out.active = {Head::kTilde, Head::kVisual, Head::kAudio};
      break;
    }
    case Variant::kVisualOnly: {
      check_input(v_feats, cfg.d_in_visual, "visual");
      const int t = v_feats.rows();
      const StreamOutputs vs = run_stream(tape, v_feats, *params.visual, cfg, mode, streams);
      out.g_v = vs.g;
      out.f_hat_v = vs.f_hat;
      out.y_v = score_head(tape, vs.f_hat, *params.head_v, cfg.dropout, mode, streams);
      out.y_tilde = Tensor::zeros({t});
      out.y_a = Tensor::zeros({t});
      out.y_fused = out.y_v;
      out.f_hat = vs.f_hat;
      out.active = {Head::kVisual};
      break;
    }
    case Variant::kAudioOnly: {
      check_input(a_feats, cfg.d_in_audio, "audio");
      const int t = a_feats.rows();
      const StreamOutputs as = run_stream(tape, a_feats, *params.audio, cfg, mode, streams);
      out.g_a = as.g;
      out.f_hat_a = as.f_hat;
      out.y_a = score_head(tape, as.f_hat, *params.head_a, cfg.dropout, mode, streams);
      out.y_tilde = Tensor::zeros({t});
      out.y_v = Tensor::zeros({t});
      out.y_fused = out.y_a;
      out.f_hat = as.f_hat;
      out.active = {Head::kAudio};
      break;
    }
    case Variant::kConcatAV: {
      check_input(v_feats, cfg.d_in_visual, "visual");
      check_input(a_feats, cfg.d_in_audio, "audio");
      if (v_feats.rows() != a_feats.rows()) {
        throw ShapeError("model_forward: visual and audio sequence lengths differ: " +
                         shape_str(v_feats.shape()) + " vs " + shape_str(a_feats.shape()));
      }
      const int t = v_feats.rows();
      const Tensor joined = concat_cols(tape, v_feats, a_feats);
      const StreamOutputs js = run_stream(tape, joined, *params.joint, cfg, mode, streams);
      out.g_v = js.g;
      out.f_hat_v = js.f_hat;
      out.y_tilde = score_head(tape, js.f_hat, *params.head_tilde, cfg.dropout, mode, streams);
      out.y_v = Tensor::zeros({t});
      out.y_a = Tensor::zeros({t});
      out.y_fused = out.y_tilde;
      out.f_hat = js.f_hat;
      out.active = {Head::kTilde};
      break;
    }
  }
  return out;
}

}  // namespace vhd
