// Writes the bundled synthetic datasets under data/: an inflation-like UCSV
// series and a 5-covariate regression set, both from the library's own
// simulators with fixed seeds.

#include "icop/margins.hpp"
#include "icop/regression.hpp"
#include "icop/rng.hpp"
#include "icop/special.hpp"
#include "icop/timeseries.hpp"

#include <cstdio>
#include <fstream>

using namespace icop;

int main(int argc, char** argv) {
    std::string dir = argc > 1 ? argv[1] : "data";

    {
        // inflation-like series: UCSV auxiliary process, skewed heavy-ish margin
        Rng rng(20240901);
        UcsvParams p{0.95, 0.9, 0.05, 0.4};
        auto [z, states] = ucsv_simulate_z(p, 300, rng);
        InterpTable zm = ucsv_margin(p);
        Margin y_margin = Margin::asym_laplace(2.5, 1.2, 0.35);
        std::ofstream f(dir + "/synthetic_inflation.csv");
        f.precision(17);
        f << "y\n";
        for (int t = 0; t < z.size(); ++t)
            f << y_margin.quantile(zm.cdf(z(t))) << "\n";
    }

    {
        // regression set: n = 580, p = 5, two active coefficients
        Rng rng(20240902);
        const int n = 580, p = 5;
        Eigen::VectorXd beta(p);
        beta << 1.5, 0.0, 0.8, 0.0, 0.0;
        HorseshoeState theta{Eigen::VectorXd::Ones(p), 1.0};
        Margin y_margin = Margin::asym_laplace(0.0, 1.0, 0.6);
        std::ofstream f(dir + "/synthetic_regression.csv");
        f.precision(17);
        f << "y,x1,x2,x3,x4,x5\n";
        for (int i = 0; i < n; ++i) {
            Eigen::VectorXd x(p);
            for (int j = 0; j < p; ++j) x(j) = rng.normal();
            double s = reg_scale(x, theta);
            double zi = s * (x.dot(beta) + rng.normal());
            f << y_margin.quantile(norm_cdf(zi));
            for (int j = 0; j < p; ++j) f << "," << x(j);
            f << "\n";
        }
    }
    std::printf("wrote %s/synthetic_inflation.csv and %s/synthetic_regression.csv\n",
                dir.c_str(), dir.c_str());
    return 0;
}
