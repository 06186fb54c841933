#include "ctvos/model.hpp"

namespace ctvos {

// Instantiate the trained-precision and verification-precision variants once.
template struct ModelParams<float>;
template struct ModelParams<double>;

template TensorPtr<float> encode_current<float>(Tape<float>&, const ModelParams<float>&,
                                                const TensorPtr<float>&);
template TensorPtr<double> encode_current<double>(Tape<double>&, const ModelParams<double>&,
                                                  const TensorPtr<double>&);
template TensorPtr<float> encode_keys<float>(Tape<float>&, const ModelParams<float>&,
                                             const std::vector<TensorPtr<float>>&);
template TensorPtr<double> encode_keys<double>(Tape<double>&, const ModelParams<double>&,
                                               const std::vector<TensorPtr<double>>&);
template TensorPtr<float> encode_values<float>(Tape<float>&, const ModelParams<float>&,
                                               const std::vector<TensorPtr<float>>&);
template TensorPtr<double> encode_values<double>(Tape<double>&, const ModelParams<double>&,
                                                 const std::vector<TensorPtr<double>>&);
template TensorPtr<float> attention_read<float>(Tape<float>&, const TensorPtr<float>&,
                                                const TensorPtr<float>&, const TensorPtr<float>&);
template TensorPtr<double> attention_read<double>(Tape<double>&, const TensorPtr<double>&,
                                                  const TensorPtr<double>&,
                                                  const TensorPtr<double>&);
template DecodeOut<float> decode<float>(Tape<float>&, const ModelParams<float>&,
                                        const TensorPtr<float>&, const TensorPtr<float>&);
template DecodeOut<double> decode<double>(Tape<double>&, const ModelParams<double>&,
                                          const TensorPtr<double>&, const TensorPtr<double>&);
template PipelineFns<float> make_model_pipeline<float>(const ModelParams<float>&);
template PipelineFns<float> make_coordinate_stub_pipeline<float>(int, float);

}  // namespace ctvos
