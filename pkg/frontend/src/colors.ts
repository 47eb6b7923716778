// Deterministic palettes: the same agent gets the same color in every panel.

const AGENT_PALETTE = [
    '#e6194b', '#3cb44b', '#4363d8', '#f58231', '#911eb4',
    '#46f0f0', '#f032e6', '#bcf60c', '#fabebe', '#008080',
    '#9a6324', '#800000', '#808000', '#000075', '#aaffc3',
];

const CLUSTER_PALETTE = [
    '#a6cee3', '#b2df8a', '#fdbf6f', '#cab2d6', '#fb9a99',
    '#ffff99', '#1f78b4', '#33a02c', '#ff7f00', '#6a3d9a',
    '#e31a1c', '#b15928', '#8dd3c7', '#bebada', '#fccde5',
];

export function agentColor(agentId: string): string {
    const index = parseInt(agentId.replace(/[^0-9]/g, ''), 10);
    return AGENT_PALETTE[(Number.isFinite(index) ? index : 0) % AGENT_PALETTE.length];
}

export function clusterColor(cluster: number): string {
    return CLUSTER_PALETTE[cluster % CLUSTER_PALETTE.length];
}
