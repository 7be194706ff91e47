#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "mousse/optim/adamw.hpp"
#include "mousse/optim/elementwise.hpp"
#include "mousse/optim/lion.hpp"
#include "mousse/optim/mousse.hpp"
#include "mousse/optim/muon.hpp"
#include "mousse/optim/shampoo.hpp"
#include "mousse/optim/soap.hpp"

namespace mousse {

enum class OptimizerKind { mousse, muon, shampoo, soap, adamw, lion, elementwise };

inline const char* to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::mousse: return "mousse";
    case OptimizerKind::muon: return "muon";
    case OptimizerKind::shampoo: return "shampoo";
    case OptimizerKind::soap: return "soap";
    case OptimizerKind::adamw: return "adamw";
    case OptimizerKind::lion: return "lion";
    case OptimizerKind::elementwise: return "elementwise";
  }
  return "?";
}

inline OptimizerKind parse_optimizer_kind(std::string_view name) {
  for (auto kind : {OptimizerKind::mousse, OptimizerKind::muon, OptimizerKind::shampoo,
                    OptimizerKind::soap, OptimizerKind::adamw, OptimizerKind::lion,
                    OptimizerKind::elementwise}) {
    if (name == to_string(kind)) return kind;
  }
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

/// Matrix-wise optimizers hand vector-shaped parameters to Lion.
inline bool is_matrix_wise(OptimizerKind kind) {
  return kind == OptimizerKind::mousse || kind == OptimizerKind::muon ||
         kind == OptimizerKind::shampoo || kind == OptimizerKind::soap;
}

/// Hyperparameters for every optimizer; only the block matching `kind` is used.
struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::mousse;
  MousseConfig mousse{};
  MuonConfig muon{};
  ShampooConfig shampoo{};
  SoapConfig soap{};
  AdamConfig adamw{};
  LionConfig lion{};
  ElementwiseConfig elementwise{};
};

template <typename Scalar>
using OptimizerState =
    std::variant<MousseState<Scalar>, MuonState<Scalar>, ShampooState<Scalar>, SoapState<Scalar>,
                 AdamState<Scalar>, LionState<Scalar>, ElementwiseState<Scalar>>;

template <typename Scalar = double>
OptimizerState<Scalar> make_state(OptimizerKind kind, const OptimizerSettings& s, Index rows, Index cols) {
  switch (kind) {
    case OptimizerKind::mousse: return MousseState<Scalar>(rows, cols, s.mousse);
    case OptimizerKind::muon: return MuonState<Scalar>(rows, cols, s.muon);
    case OptimizerKind::shampoo: return ShampooState<Scalar>(rows, cols, s.shampoo);
    case OptimizerKind::soap: validate(s.soap.adam); return SoapState<Scalar>(rows, cols, s.soap);
    case OptimizerKind::adamw: validate(s.adamw); return AdamState<Scalar>(rows, cols, s.adamw);
    case OptimizerKind::lion: return LionState<Scalar>(rows, cols, s.lion);
    case OptimizerKind::elementwise:
      validate(s.elementwise.adam);
      return ElementwiseState<Scalar>(rows, cols, s.elementwise);
  }
  throw ConfigError("unhandled optimizer kind");
}

template <typename Scalar>
UpdateReport<Scalar> step(OptimizerState<Scalar>& state, Mat<Scalar>& param, const Mat<Scalar>& grad,
                          const StepContext& ctx) {
  return std::visit(
      [&](auto& st) -> UpdateReport<Scalar> {
        using T = std::decay_t<decltype(st)>;
        if constexpr (std::is_same_v<T, MousseState<Scalar>>) return mousse_step(param, grad, st, ctx);
        else if constexpr (std::is_same_v<T, MuonState<Scalar>>) return muon_step(param, grad, st, ctx);
        else if constexpr (std::is_same_v<T, ShampooState<Scalar>>) return shampoo_step(param, grad, st, ctx);
        else if constexpr (std::is_same_v<T, SoapState<Scalar>>) return soap_step(param, grad, st, ctx);
        else if constexpr (std::is_same_v<T, AdamState<Scalar>>) return adamw_step(param, grad, st, ctx);
        else if constexpr (std::is_same_v<T, LionState<Scalar>>) return lion_step(param, grad, st, ctx);
        else return elementwise_whitened_step(param, grad, st, ctx);
      },
      state);
}

/// Preconditioner statistics of a state, when it keeps any.
template <typename Scalar>
const KroneckerStats<Scalar>* kronecker_stats(const OptimizerState<Scalar>& state) {
  if (const auto* s = std::get_if<MousseState<Scalar>>(&state)) return &s->stats;
  if (const auto* s = std::get_if<ShampooState<Scalar>>(&state)) return &s->stats;
  if (const auto* s = std::get_if<SoapState<Scalar>>(&state)) return &s->stats;
  return nullptr;
}

template <typename Scalar>
void save_state(const OptimizerState<Scalar>& state, Checkpoint& ck, const std::string& prefix) {
  ck.put_scalar(prefix + "kind", double(state.index()));
  std::visit([&](const auto& st) { st.save(ck, prefix); }, state);
}

template <typename Scalar>
void load_state(OptimizerState<Scalar>& state, const Checkpoint& ck, const std::string& prefix) {
  if (std::size_t(ck.get_scalar(prefix + "kind")) != state.index()) {
    throw IoError("checkpoint: optimizer kind under '" + prefix + "' does not match config");
  }
  std::visit([&](auto& st) { st.load(ck, prefix); }, state);
}

}  // namespace mousse
