#pragma once

// Brute-force minimum of the two-class probe objective.
//
// With two classes only v = w1 - w0 and beta = b1 - b0 reach the loss, and
// for fixed v the penalty 1/2 (|w0|^2 + |w1|^2) is smallest at w1 = -w0 = v/2,
// giving 1/4 |v|^2. The oracle therefore searches (v1, v2, beta).

#include <array>
#include <vector>

namespace oracle {

struct Point2 {
  double x1;
  double x2;
  int y;  // 0 or 1
};

// 1/4 |v|^2 + C * sum log(1 + exp(-s_i (v . x_i + beta))), s_i = 2 y_i - 1.
double reduced_objective(const std::vector<Point2>& data, double c, double v1, double v2,
                         double beta);

// Full-parameter objective of a 2 x 2 weight matrix and bias pair.
double full_objective(const std::vector<Point2>& data, double c,
                      const std::array<double, 4>& w, const std::array<double, 2>& b);

struct GridResult {
  double v1 = 0, v2 = 0, beta = 0;
  double objective = 0;
};

// `points` per axis on [-half_width, half_width]^3, then `refinements`
// re-centred passes over +-2 cells of the incumbent.
GridResult grid_minimum(const std::vector<Point2>& data, double c, double half_width,
                        int points, int refinements);

}  // namespace oracle
