"""Compound scaling: grow depth, width, and resolution together by
alpha^phi, beta^phi, gamma^phi under alpha * beta^2 * gamma^2 ~= 2."""

from tumorvision import CompoundScaleConfig, build_scaled_classifier, compound_scale

config = CompoundScaleConfig()
print(f"constraint alpha*beta^2*gamma^2 = {config.alpha * config.beta**2 * config.gamma**2:.4f}")

for phi in (0, 0.5, 1, 2):
    dims = compound_scale(CompoundScaleConfig(phi=phi))
    model = build_scaled_classifier(dims)
    params = sum(p.numel() for p in model.net.parameters())
    print(f"phi={phi:<4} depth={dims.depth:<3} width={dims.width:<3} "
          f"resolution={dims.resolution:<4} params={params:,}")
