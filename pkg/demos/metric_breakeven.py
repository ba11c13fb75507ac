"""When does personalization win?

Two strategies, each summarised by a pair of numbers: how well it does on a
user's own data and how well it does on everyone's.  The personalization score
blends the two with a weight alpha; the break-even alpha is where the ranking
of the two strategies flips.
"""
from personabench.metric import (Orientation, PerfPair, breakeven_alpha,
                                 personalization_score)

# Accuracies for a user-specific model and an averaging ensemble.
single = PerfPair(local=0.86, global_=0.74)
average = PerfPair(local=0.83, global_=0.79)

print("alpha  single  average")
for alpha in (0.0, 0.25, 0.5, 0.75, 1.0):
    print(f"{alpha:5.2f}  {personalization_score(alpha, single):.3f}   "
          f"{personalization_score(alpha, average):.3f}")

cut = breakeven_alpha(single, average)
print(f"\nbreak-even alpha = {cut.value:.4f}")
print(f"  above it prefer: {cut.preferred_above.value}  (first = single)")
print(f"  below it prefer: {cut.preferred_below.value}")

# The same machinery works for losses, where smaller numbers are better.
loss_single = PerfPair(-0.00523, 0.0, Orientation.LOWER_IS_BETTER)
loss_average = PerfPair(0.0, -0.0545, Orientation.LOWER_IS_BETTER)
cut = breakeven_alpha(loss_single, loss_average)
print(f"\nloss-oriented example: cut at {cut.value:.4f}, "
      f"above={cut.preferred_above.value}, below={cut.preferred_below.value}")

# Dominated strategies never cross.
print("dominated pair:", breakeven_alpha(PerfPair(0.9, 0.9), PerfPair(0.8, 0.8)))
