#pragma once

#include "panorad/nn.hpp"
#include "panorad/raster_io.hpp"

#include <string>

namespace panorad {

/// Snapshot of a parameter list in the weights-file layout.
template <typename Scalar>
WeightsFile to_weights_file(const nn::ParameterList<Scalar>& params, const std::string& arch) {
    WeightsFile out;
    out.arch = arch;
    for (const auto& p : params) {
        WeightTensor t;
        t.name = p.name;
        t.shape = p.tensor.shape();
        t.data.resize(static_cast<std::size_t>(p.tensor.numel()));
        for (Eigen::Index i = 0; i < p.tensor.numel(); ++i) {
            t.data[static_cast<std::size_t>(i)] = static_cast<float>(p.tensor.value()[i]);
        }
        out.tensors.push_back(std::move(t));
    }
    return out;
}

/// Copies stored values into a parameter list; names, order, shapes and the
/// architecture tag must all agree.
template <typename Scalar>
void load_weights_file(const nn::ParameterList<Scalar>& params, const WeightsFile& file,
                       const std::string& arch) {
    if (file.arch != arch) {
        throw IoError("weights: architecture '" + file.arch + "' does not match '" + arch + "'");
    }
    if (file.tensors.size() != params.size()) {
        throw IoError("weights: file holds " + std::to_string(file.tensors.size()) + " tensors, model has " +
                      std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const WeightTensor& t = file.tensors[i];
        if (t.name != params[i].name || t.shape != params[i].tensor.shape()) {
            throw IoError("weights: tensor " + std::to_string(i) + " is '" + t.name + "' " +
                          nn::shape_string(t.shape) + ", model expects '" + params[i].name + "' " +
                          nn::shape_string(params[i].tensor.shape()));
        }
        auto dst = params[i].tensor;
        for (std::size_t k = 0; k < t.data.size(); ++k) {
            dst.mutable_value()[static_cast<Eigen::Index>(k)] = static_cast<Scalar>(t.data[k]);
        }
    }
}

}  // namespace panorad
