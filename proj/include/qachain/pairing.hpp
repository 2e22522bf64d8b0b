#pragma once

#include <Eigen/Dense>
#include <complex>

namespace qachain {

using cplx = std::complex<double>;

/// Antisymmetric pairing matrix Z of the Gaussian state
/// N exp(1/2 sum_ij Z_ij c+_i c+_j)|0>, where |0> is the all-x spin state.
class PairingMatrix {
public:
    PairingMatrix() = default;
    explicit PairingMatrix(Eigen::MatrixXcd Z);

    static PairingMatrix zero(int L) { return PairingMatrix(Eigen::MatrixXcd::Zero(L, L)); }

    int size() const noexcept { return static_cast<int>(Z_.rows()); }
    const Eigen::MatrixXcd& matrix() const noexcept { return Z_; }
    bool is_real() const;

private:
    Eigen::MatrixXcd Z_;
};

}  // namespace qachain
