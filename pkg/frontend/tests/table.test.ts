import { describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { SessionState } from '../src/state.js';
import { CorpusTable } from '../src/table.js';
import { fakeFetch, loadEvents, loadExportCsv, loadLayout } from './helpers.js';

function builtTable(): { table: CorpusTable; state: SessionState } {
    const state = new SessionState(loadLayout());
    state.applyAll(loadEvents());
    const api = new ApiClient('', fakeFetch({ '/export.csv': loadExportCsv() }));
    return { table: new CorpusTable(state, api, 's1'), state };
}

describe('corpus table', () => {
    it('download is byte-identical to /export.csv', async () => {
        const { table } = builtTable();
        expect(await table.downloadCsv()).toBe(loadExportCsv());
    });

    it('rows mirror the export decisions', () => {
        const { table } = builtTable();
        const rows = table.rows();
        expect(rows.length).toBe(200);
        const exportLines = loadExportCsv().trim().split('\n').slice(1);
        const decided = new Map<string, string>();
        for (const line of exportLines) {
            // fixture ids/decisions contain no quoting edge cases
            const cells = line.split(',');
            decided.set(cells[0], cells[5]);
        }
        for (const row of rows) {
            expect(row.decision).toBe(decided.get(row.id));
        }
    });

    it('sorts and filters', () => {
        const { table } = builtTable();
        table.setSort('decision');
        const sorted = table.rows().map((row) => row.decision);
        expect(sorted).toEqual([...sorted].sort());
        table.filterText = 'included';
        expect(table.rows().every((row) => row.decision === 'Included')).toBe(true);
        table.filterText = 'agent-0';
        expect(table.rows().every((row) => row.agent_id === 'agent-0')).toBe(true);
    });
});
