#include "grid_oracle.hpp"

#include <cmath>
#include <limits>

namespace oracle {

namespace {

// log(1 + exp(t)) without overflow.
double softplus(double t) {
  return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

}  // namespace

double reduced_objective(const std::vector<Point2>& data, double c, double v1, double v2,
                         double beta) {
  double loss = 0;
  for (const Point2& p : data) {
    const double s = p.y == 1 ? 1.0 : -1.0;
    loss += softplus(-s * (v1 * p.x1 + v2 * p.x2 + beta));
  }
  return 0.25 * (v1 * v1 + v2 * v2) + c * loss;
}

double full_objective(const std::vector<Point2>& data, double c,
                      const std::array<double, 4>& w, const std::array<double, 2>& b) {
  // Row-major: w[0], w[1] for class 0; w[2], w[3] for class 1.
  double reg = 0;
  for (double x : w) reg += x * x;
  const double v1 = w[2] - w[0];
  const double v2 = w[3] - w[1];
  const double beta = b[1] - b[0];
  double loss = 0;
  for (const Point2& p : data) {
    const double s = p.y == 1 ? 1.0 : -1.0;
    loss += softplus(-s * (v1 * p.x1 + v2 * p.x2 + beta));
  }
  return 0.5 * reg + c * loss;
}

GridResult grid_minimum(const std::vector<Point2>& data, double c, double half_width,
                        int points, int refinements) {
  GridResult best;
  best.objective = std::numeric_limits<double>::infinity();
  double centre[3] = {0, 0, 0};
  double half = half_width;
  for (int pass = 0; pass <= refinements; ++pass) {
    const double step = 2 * half / (points - 1);
    for (int i = 0; i < points; ++i) {
      const double v1 = centre[0] - half + i * step;
      for (int j = 0; j < points; ++j) {
        const double v2 = centre[1] - half + j * step;
        for (int k = 0; k < points; ++k) {
          const double beta = centre[2] - half + k * step;
          const double f = reduced_objective(data, c, v1, v2, beta);
          if (f < best.objective) best = {v1, v2, beta, f};
        }
      }
    }
    centre[0] = best.v1;
    centre[1] = best.v2;
    centre[2] = best.beta;
    half = 2 * step;
  }
  return best;
}

}  // namespace oracle
