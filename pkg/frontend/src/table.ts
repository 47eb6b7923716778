// Corpus table: mirrors the export rows with sort/filter; the download
// button returns the service CSV verbatim (single source of truth).

import { ApiClient } from './api.js';
import { SessionState, TableRow } from './state.js';

export type SortKey = keyof TableRow;

export class CorpusTable {
    sortKey: SortKey = 'id';
    sortAscending = true;
    filterText = '';

    constructor(
        private readonly state: SessionState,
        private readonly api: ApiClient,
        private readonly sessionId: string,
    ) {}

    setSort(key: SortKey): void {
        if (this.sortKey === key) this.sortAscending = !this.sortAscending;
        else {
            this.sortKey = key;
            this.sortAscending = true;
        }
    }

    rows(): TableRow[] {
        const needle = this.filterText.toLowerCase();
        let rows = this.state.tableRows();
        if (needle) {
            rows = rows.filter(
                (row) =>
                    row.id.toLowerCase().includes(needle) ||
                    row.title.toLowerCase().includes(needle) ||
                    row.decision.toLowerCase().includes(needle) ||
                    row.agent_id.toLowerCase().includes(needle),
            );
        }
        const key = this.sortKey;
        const direction = this.sortAscending ? 1 : -1;
        return rows.sort((a, b) => {
            const va = a[key];
            const vb = b[key];
            if (va < vb) return -direction;
            if (va > vb) return direction;
            return a.id < b.id ? -1 : 1;
        });
    }

    /** Byte-identical to GET /export.csv by construction. */
    async downloadCsv(): Promise<string> {
        return this.api.exportCsv(this.sessionId);
    }
}
