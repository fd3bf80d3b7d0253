#pragma once

#include <limits>

namespace ddval {

// Stagnation-window ending condition: stop once no observation has strictly
// improved on the running best during the last `window` observations. With a
// constant sequence this fires at exactly round window + 1; with a strictly
// improving sequence it never fires.
template <typename T>
class StagnationWindow {
public:
    explicit StagnationWindow(int window) : window_(window) {}

    // Feeds one result; returns true when training should stop.
    bool observe(T value) {
        ++round_;
        if (round_ == 1 || value > best_) {
            best_ = value;
            last_improvement_ = round_;
        }
        return round_ - last_improvement_ >= window_;
    }

    int rounds_seen() const { return round_; }
    T best() const { return best_; }

private:
    int window_;
    int round_ = 0;
    int last_improvement_ = 0;
    T best_ = std::numeric_limits<T>::lowest();
};

}  // namespace ddval
