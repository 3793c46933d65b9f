#include "dasmae/model.hpp"

namespace dasmae::model {

void validate(const ModelConfig& c) {
    if (c.cp == 0 || c.tp == 0 || c.fp == 0 || c.di == 0) throw ContractError("ModelConfig: tube extents must be positive");
    if (c.de == 0 || c.dd == 0 || c.he == 0 || c.hd == 0 || c.mlp_ratio == 0 || c.tokens == 0) {
        throw ContractError("ModelConfig: widths, heads, MLP ratio and token count must be positive");
    }
    if (c.de % c.he != 0) throw ContractError("ModelConfig: encoder width not divisible by encoder heads");
    if (c.dd % c.hd != 0) throw ContractError("ModelConfig: decoder width not divisible by decoder heads");
}

std::size_t block_param_count(std::size_t d, std::size_t r) {
    const std::size_t norms = 2 * (2 * d);
    const std::size_t attention = 4 * (d * d + d);
    const std::size_t mlp = (d * r * d + r * d) + (r * d * d + d);
    return norms + attention + mlp;
}

std::size_t param_count(const ModelConfig& c) {
    validate(c);
    const std::size_t p = c.tube_size();
    const std::size_t n = c.tokens;
    std::size_t total = 0;
    total += p * c.de + c.de;                          // tube embedding
    total += n * c.de;                                 // encoder positions
    total += c.le * block_param_count(c.de, c.mlp_ratio);
    total += 2 * c.de;                                 // encoder norm
    total += c.de * c.dd + c.dd;                       // decoder projection
    total += c.dd;                                     // mask token
    total += n * c.dd;                                 // decoder positions
    total += c.ld * block_param_count(c.dd, c.mlp_ratio);
    total += 2 * c.dd;                                 // decoder norm
    total += c.dd * p + p;                             // reconstruction head
    return total;
}

}  // namespace dasmae::model
