#include "lcmae/nn.hpp"

namespace lcmae {

void TransformerConfig::validate() const {
  if (embed_dim < 1) throw ContractError("TransformerConfig: embed_dim must be >= 1");
  if (n_heads < 1) throw ContractError("TransformerConfig: n_heads must be >= 1");
  if (embed_dim % n_heads != 0)
    throw ContractError("TransformerConfig: embed_dim not divisible by n_heads");
  // depth 0 is legal and degenerates to the final norm alone
  if (depth < 0) throw ContractError("TransformerConfig: depth must be >= 0");
  if (mlp_ratio < 1) throw ContractError("TransformerConfig: mlp_ratio must be >= 1");
}

}  // namespace lcmae
